//! Project predictions onto the edge-margin and minimum-gap constraints.

use gebd_kit::align::{align_boundaries, max_feasible_count, AlignConfig, FeasibleBand};
use gebd_kit::BoundarySet;

fn main() -> gebd_kit::Result<()> {
    let cfg = AlignConfig::default();
    let duration = 10.0;
    let band = FeasibleBand::new(duration, &cfg);
    println!(
        "band [{:.2}, {:.2}], gap {:.2}, capacity {}",
        band.lo,
        band.hi,
        band.gap,
        max_feasible_count(duration, &cfg)
    );

    let cases = [vec![0.5, 9.5], vec![5.0, 5.4], vec![2.0, 5.0, 8.0]];
    for xs in cases {
        let out = align_boundaries(&BoundarySet::new("v", xs.clone()), None, duration, &cfg)?;
        println!("{xs:?} -> {:?}", out.boundaries);
    }

    // too many boundaries: the weakest peaks are dropped before projecting
    let crowded: Vec<f64> = (1..=12).map(|i| i as f64 * 0.75).collect();
    let scores: Vec<f64> = (0..12)
        .map(|i| 0.5 + 0.04 * ((i * 5) % 12) as f64)
        .collect();
    let out = align_boundaries(
        &BoundarySet::new("v", crowded),
        Some(&scores),
        duration,
        &cfg,
    )?;
    println!(
        "12 crowded boundaries -> {} kept: {:.2?}",
        out.len(),
        out.boundaries
    );
    Ok(())
}

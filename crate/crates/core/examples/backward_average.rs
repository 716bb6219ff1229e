//! Average lifts over the backward geodesic flow, a^{-t} for t up to T.
//! A lift carried by the top Lyapunov line E1 stays on it, because E1 is
//! equivariant; a lift on a generic direction drifts away from E1 instead.

use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::probes::{backward_average_lift, EmpiricalLift, COMPACT_HEIGHT};
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::Lattice;
use nalgebra::dvector;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let rep = sym_power(&Representation::standard(&lattice), 2)?;
    let spectrum = estimate_spectrum(&rep, &lattice, &SpectrumJob::geodesic(4, 2500, 1))?;

    let starts = [
        ("on E1", EmpiricalLift::on_e1(&rep, &lattice, &spectrum, 100, 2)?),
        ("generic", EmpiricalLift::with_direction(&rep, &lattice, 100, &dvector![0.2, 1.0, -0.4], 2)?),
    ];
    for (name, start) in &starts {
        let (d, _) = start.distance_to_e1(&rep, &lattice, &spectrum)?;
        println!("{name}: start at mean distance {d:.2e} from E1");
        // short averaging windows: far along a^{-t}, E1 is only resolved to
        // about e^{-(λ1-λ2)t} relative precision
        for t_avg in [1, 3, 5] {
            let avg = backward_average_lift(&rep, &lattice, start, t_avg, 3)?;
            let (compact, lost) = avg.compact_part(&lattice, COMPACT_HEIGHT)?;
            let (d, _) = compact.distance_to_e1(&rep, &lattice, &spectrum)?;
            println!("  T = {t_avg}: mean distance {d:.2e} ({:.1}% of mass above the cutoff)", 100.0 * lost);
        }
    }
    Ok(())
}

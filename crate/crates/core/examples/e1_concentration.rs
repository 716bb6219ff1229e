//! Lines pushed along a random P-orbit collapse onto the top Lyapunov line
//! when the representation is irreducible, but not in a reducible one
//! started inside an invariant block.

use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::probes::{alpha_decay, e1_concentration, StartDirection};
use cocycle_lab::representation::{direct_sum, sym_power, Representation};
use cocycle_lab::sl2::Lattice;
use nalgebra::dvector;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let standard = Representation::standard(&lattice);
    let sym2 = sym_power(&standard, 2)?;
    let job = SpectrumJob::geodesic(4, 2500, 1);

    let spectrum = estimate_spectrum(&sym2, &lattice, &job)?;
    let curve = e1_concentration(&sym2, &lattice, &spectrum, 100, 50, &StartDirection::Uniform, 2)?;
    println!("Sym^2, uniform starts:");
    for p in curve.points.iter().step_by(10) {
        println!("  t = {:>4}: median {:.2e}  [{:.2e}, {:.2e}]", p.t, p.median, p.q25, p.q75);
    }

    let alpha = alpha_decay(&sym2, &lattice, &spectrum, 50, 10, 3)?;
    println!("α coordinate median at t = 0, 5, 10: {:?}", [0.0, 5.0, 10.0].map(|t| alpha.median_at(t)));

    let split = direct_sum(&standard, &Representation::trivial(1, lattice.mode()))?;
    let spectrum = estimate_spectrum(&split, &lattice, &job)?;
    let start = StartDirection::Fixed(dvector![0.0, 0.0, 1.0]);
    let curve = e1_concentration(&split, &lattice, &spectrum, 50, 50, &start, 4)?;
    println!("standard ⊕ trivial, started in the trivial block: median at t = 50 is {:.3}", curve.median_at(50.0).unwrap());
    Ok(())
}

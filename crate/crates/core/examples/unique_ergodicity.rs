//! Horocycle Birkhoff averages of a fixed test family on the projectivized
//! Sym^2 bundle, from ten starts. Their spread shrinks as the horizon grows.

use cocycle_lab::probes::{unique_ergodicity_gap, TestFamily};
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::Lattice;

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let rep = sym_power(&Representation::standard(&lattice), 2)?;
    let family = TestFamily::quadform_bump(rep.dim());
    println!("test family {} with {} functions", family.version(), family.len());
    for horizon in [2.5e3, 5e3, 1e4, 2e4] {
        let r = unique_ergodicity_gap(&rep, &lattice, 10, horizon, 1.0, &family, 17)?;
        println!(
            "T = {horizon:>7}: spread {:.4}  (starts used {}, mass above cusp cutoff {:.3})",
            r.gap, r.starts_used, r.discarded_mass
        );
    }
    Ok(())
}

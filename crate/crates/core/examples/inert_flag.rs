//! Q_j(v): the fraction of small unstable-horocycle pushes that keep v in
//! E≥j. It is 0 or 1, and which one depends on whether the representation
//! has an invariant slow block.

use cocycle_lab::cocycle::{random_base_point, SheetPoint};
use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::probes::{estimate_inert_space, measure_qj, DEFAULT_ANGLE_TOL, REFERENCE_HORIZON};
use cocycle_lab::representation::{direct_sum, sym_power, Representation};
use cocycle_lab::sl2::Lattice;
use nalgebra::{dvector, DVector};

fn main() -> cocycle_lab::Result<()> {
    let lattice = Lattice::sl2z();
    let standard = Representation::standard(&lattice);
    let x = SheetPoint::from(random_base_point(21, &lattice));
    let job = SpectrumJob::geodesic(4, 2500, 1);

    let sym2 = sym_power(&standard, 2)?;
    let split = direct_sum(&standard, &Representation::trivial(1, lattice.mode()))?;
    let cases: [(&str, &Representation, DVector<f64>); 3] = [
        ("Sym^2, generic v", &sym2, dvector![0.3, -0.7, 0.2]),
        ("standard⊕trivial, generic v", &split, dvector![0.5, 0.4, 0.1]),
        ("standard⊕trivial, v in trivial block", &split, dvector![0.0, 0.0, 1.0]),
    ];
    for (name, rep, v) in cases {
        let spectrum = estimate_spectrum(rep, &lattice, &job)?;
        let q = measure_qj(&x, &v, 2, 1000, DEFAULT_ANGLE_TOL, REFERENCE_HORIZON, rep, &lattice, &spectrum, 5)?;
        println!("{name}: Q_2 fraction {:.3} ({} used, {} dropped), sweep {:?}", q.fraction, q.used, q.dropped, q.sweep());
    }

    let spectrum = estimate_spectrum(&split, &lattice, &job)?;
    let inert = estimate_inert_space(&x, 2, &split, &lattice, &spectrum, 30, REFERENCE_HORIZON, 6)?;
    println!("inert F≥2 of standard⊕trivial has dimension {}:\n{:.3}", inert.ncols(), inert);
    Ok(())
}

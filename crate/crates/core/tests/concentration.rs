use cocycle_lab::oseledets::{estimate_spectrum, SpectrumJob};
use cocycle_lab::probes::{e1_concentration, StartDirection};
use cocycle_lab::representation::{sym_power, Representation};
use cocycle_lab::sl2::Lattice;

#[test]
fn median_distance_to_e1_does_not_recover() {
    let lattice = Lattice::sl2z();
    for k in 1..=3 {
        let rep = sym_power(&Representation::standard(&lattice), k).unwrap();
        let s = estimate_spectrum(&rep, &lattice, &SpectrumJob::geodesic(4, 2500, 1)).unwrap();
        let curve = e1_concentration(&rep, &lattice, &s, 60, 40, &StartDirection::Uniform, 2).unwrap();
        assert!(curve.median_at(0.0).unwrap() > 0.1);
        assert!(curve.worst_increase_after(5.0, 1e-12) < 1e-6, "Sym^{k}: {:?}", curve.points);
        assert!(curve.median_at(40.0).unwrap() < 1e-10);
        assert_eq!(curve.drop_fraction, 0.0);
    }
}

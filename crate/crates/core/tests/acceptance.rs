//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::time::{Duration, Instant};

use cocycle_lab::cocycle::{cocycle_step, random_base_point, random_unit_vector, stream_rng, FiberCocycle, SheetPoint};
use cocycle_lab::origami::{exponent_family_experiment, is_symplectic, KzCocycle, Move, Origami};
use cocycle_lab::oseledets::{estimate_spectrum, flag_equivariance_defect, FlagKind, Spectrum, SpectrumJob};
use cocycle_lab::probes::{
    e1_concentration, furstenberg_lambda1, measure_qj, quantile, unique_ergodicity_gap, StartDirection, TestFamily,
};
use cocycle_lab::representation::{direct_sum, sym_power, Representation};
use cocycle_lab::runner::{compute, validate_config, ExperimentConfig};
use cocycle_lab::sl2::{FlowKind, Lattice};
use nalgebra::{dvector, DVector};
use rand::Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn lat() -> Lattice {
    Lattice::sl2z()
}

fn std_rep() -> Representation {
    Representation::standard(&lat())
}

fn sym(k: usize) -> Representation {
    sym_power(&std_rep(), k).unwrap()
}

/// Flow time 1e5, split over 8 trajectories.
fn long_job(seed: u64) -> SpectrumJob {
    SpectrumJob::geodesic(8, 12_500, seed)
}

fn spectrum_of<C: FiberCocycle + ?Sized>(c: &C, job: &SpectrumJob) -> Result<Spectrum, String> {
    estimate_spectrum(c, &lat(), job).map_err(|e| e.to_string())
}

fn timed(label: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let r = f()?;
    let dt = t.elapsed();
    ensure(dt <= budget, format!("{label} took {dt:.1?}, budget {budget:?}"))?;
    Ok(format!("{r} [{dt:.1?}]"))
}

fn relative(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

/// Return words and matrices compose along the flows.
fn c1_cocycle_identities() -> Outcome {
    timed("identity suite", Duration::from_secs(10), || {
        let lattice = lat();
        let rep = sym(2);
        let kinds = [FlowKind::Geodesic, FlowKind::HorocyclePlus, FlowKind::HorocycleMinus];
        let mut worst = 0.0f64;
        for i in 0..1000u64 {
            let mut rng = stream_rng(11, i);
            let x = SheetPoint::from(random_base_point(rng.random(), &lattice));
            let kind = kinds[(i % 3) as usize];
            let s: f64 = rng.random_range(-3.0..3.0);
            let t: f64 = rng.random_range(-3.0..3.0);
            let err = |e: cocycle_lab::Error| e.to_string();
            let first = cocycle_step(&x, kind, s, &rep, &lattice).map_err(err)?;
            let second = cocycle_step(&first.to_point(), kind, t, &rep, &lattice).map_err(err)?;
            let whole = cocycle_step(&x, kind, s + t, &rep, &lattice).map_err(err)?;
            let composed = second.word.concat(&first.word);
            ensure(
                lattice.same_element(&whole.word, &composed).map_err(err)?,
                format!("return words disagree at case {i}"),
            )?;
            worst = worst.max(relative(&(&second.matrix * &first.matrix), &whole.matrix));
            worst = worst.max(whole.base_to.distance(&second.base_to));
        }
        ensure(worst <= 1e-9, format!("worst relative error {worst:.2e}"))?;
        Ok(format!("1000 cases, worst relative error {worst:.1e}"))
    })
}

fn c2_exponent_oracles() -> Outcome {
    let budget = Duration::from_secs(60);
    let trivial = timed("trivial", budget, || {
        let s = spectrum_of(&Representation::trivial(3, lat().mode()), &long_job(1))?;
        let worst = s.raw_exponents.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        ensure(worst <= 1e-3, format!("trivial |λ| up to {worst:.2e}"))?;
        Ok(format!("trivial max|λ| {worst:.1e}"))
    })?;
    let standard = timed("standard", budget, || {
        let s = spectrum_of(&std_rep(), &long_job(2))?;
        ensure(s.horizon >= 1e5, "horizon below 1e5")?;
        let err = (s.raw_exponents[0] - 1.0).abs().max((s.raw_exponents[1] + 1.0).abs());
        ensure(err <= 0.02, format!("standard {:?}", s.raw_exponents))?;
        Ok(format!("standard err {err:.1e}"))
    })?;
    let cubic = timed("Sym^3", budget, || {
        let s = spectrum_of(&sym(3), &long_job(3))?;
        let want = [3.0, 1.0, -1.0, -3.0];
        let err = s.raw_exponents.iter().zip(want).fold(0.0f64, |m, (x, w)| m.max((x - w).abs()));
        ensure(err <= 0.05, format!("Sym^3 {:?}", s.raw_exponents))?;
        Ok(format!("Sym^3 err {err:.1e}"))
    })?;
    Ok(format!("{trivial}; {standard}; {cubic}"))
}

fn c3_sum_rule() -> Outcome {
    let lattice = lat();
    let job = SpectrumJob::geodesic(4, 2500, 5);
    let mut worst = 0.0f64;
    let reps = [
        std_rep(),
        sym(2),
        sym(3),
        Representation::trivial(2, lattice.mode()),
        direct_sum(&std_rep(), &Representation::trivial(1, lattice.mode())).unwrap(),
        Representation::standard(&Lattice::free()),
    ];
    for rep in &reps {
        let l = Lattice::new(rep.mode());
        let s = estimate_spectrum(rep, &l, &job).map_err(|e| e.to_string())?;
        worst = worst.max(s.weighted_sum().abs());
    }
    for o in [Origami::torus(), Origami::l_shaped(2, 2).unwrap()] {
        let kz = KzCocycle::new(&o, 100).map_err(|e| e.to_string())?;
        worst = worst.max(spectrum_of(&kz, &job)?.weighted_sum().abs());
    }
    ensure(worst <= 1e-6, format!("worst |Σ m·λ| = {worst:.2e}"))?;
    Ok(format!("8 SL-valued cocycles, worst |Σ m·λ| {worst:.1e}"))
}

fn c4_furstenberg() -> Outcome {
    let mut parts = Vec::new();
    for (name, rep) in [("standard", std_rep()), ("Sym^2", sym(2)), ("Sym^3", sym(3))] {
        let s = spectrum_of(&rep, &SpectrumJob::geodesic(8, 2500, 7))?;
        let f = furstenberg_lambda1(&rep, &lat(), &s, 16, 2000, 8).map_err(|e| e.to_string())?;
        let combined = (f.stderr.powi(2) + s.stderr[0].powi(2)).sqrt();
        let tol = 0.05f64.max(3.0 * combined);
        let diff = (f.estimate - s.top()).abs();
        ensure(diff <= tol, format!("{name}: Furstenberg {:.4} vs frame {:.4} (tol {tol:.3})", f.estimate, s.top()))?;
        parts.push(format!("{name} {:.3}/{:.3}", f.estimate, s.top()));
    }
    Ok(parts.join(", "))
}

fn c5_e1_concentration() -> Outcome {
    let mut parts = Vec::new();
    for (name, rep) in [("standard", std_rep()), ("Sym^2", sym(2))] {
        let s = spectrum_of(&rep, &SpectrumJob::geodesic(4, 2500, 9))?;
        let curve = e1_concentration(&rep, &lat(), &s, 100, 50, &StartDirection::Uniform, 10).map_err(|e| e.to_string())?;
        let m = curve.median_at(50.0).ok_or("no samples at t = 50")?;
        ensure(m <= 1e-3, format!("{name}: median distance {m:.2e} at t = 50"))?;
        parts.push(format!("{name} median {m:.1e}"));
    }
    let rep = direct_sum(&std_rep(), &Representation::trivial(1, lat().mode())).unwrap();
    let s = spectrum_of(&rep, &SpectrumJob::geodesic(4, 2500, 9))?;
    let start = StartDirection::Fixed(dvector![0.0, 0.0, 1.0]);
    let curve = e1_concentration(&rep, &lat(), &s, 50, 50, &start, 11).map_err(|e| e.to_string())?;
    let low = curve.points.iter().filter(|p| p.samples > 0).map(|p| p.median).fold(f64::INFINITY, f64::min);
    ensure(low >= 0.5, format!("standard⊕trivial dipped to {low:.3}"))?;
    parts.push(format!("standard⊕trivial min median {low:.2}"));
    Ok(parts.join(", "))
}

fn c6_zero_one() -> Outcome {
    let lattice = lat();
    let triv = |d| Representation::trivial(d, lattice.mode());
    // (name, representation, j, fixed vector or random, expected branch)
    let panel: Vec<(&str, Representation, usize, Option<DVector<f64>>, bool)> = vec![
        ("standard", std_rep(), 2, None, false),
        ("Sym^2", sym(2), 2, None, false),
        ("Sym^2", sym(2), 3, None, false),
        ("Sym^3", sym(3), 2, None, false),
        ("standard⊕trivial", direct_sum(&std_rep(), &triv(1)).unwrap(), 2, Some(dvector![0.0, 0.0, 1.0]), true),
        ("Sym^2⊕trivial", direct_sum(&sym(2), &triv(1)).unwrap(), 2, Some(dvector![0.0, 0.0, 0.0, 1.0]), true),
    ];
    let mut parts = Vec::new();
    for (i, (name, rep, j, v, high)) in panel.into_iter().enumerate() {
        let s = spectrum_of(&rep, &SpectrumJob::geodesic(4, 2500, 12))?;
        let mut rng = stream_rng(13, i as u64);
        let x = SheetPoint::from(random_base_point(rng.random(), &lattice));
        let v = v.unwrap_or_else(|| random_unit_vector(&mut rng, rep.dim()));
        let q = measure_qj(&x, &v, j, 1000, 1e-2, 30.0, &rep, &lattice, &s, 14).map_err(|e| e.to_string())?;
        let f = q.fraction;
        ensure(f <= 0.05 || f >= 0.95, format!("{name} j={j}: fraction {f:.3} off both branches"))?;
        ensure((f >= 0.95) == high, format!("{name} j={j}: fraction {f:.3} on the wrong branch"))?;
        ensure(q.used >= 900, format!("{name} j={j}: only {} of 1000 samples usable", q.used))?;
        parts.push(format!("{name} Q{j} {f:.2}"));
    }
    Ok(parts.join(", "))
}

fn c7_flag_equivariance() -> Outcome {
    let lattice = lat();
    let rep = sym(2);
    let s = spectrum_of(&rep, &SpectrumJob::geodesic(8, 2500, 15))?;
    let median = |kind: FlagKind, j: usize, motion: FlowKind, t: f64| -> Result<f64, String> {
        let mut ds: Vec<f64> = (0..50u64)
            .map(|i| {
                let x = SheetPoint::from(random_base_point(cocycle_lab::cocycle::derive_seed(16, i), &lattice));
                flag_equivariance_defect(&x, kind, j, motion, t, &rep, &lattice, 100.0, &s).map_err(|e| e.to_string())
            })
            .collect::<Result<_, _>>()?;
        ds.sort_by(f64::total_cmp);
        Ok(quantile(&ds, 0.5))
    };
    let b1_u = median(FlagKind::Backward, 1, FlowKind::HorocyclePlus, 1.0)?;
    ensure(b1_u <= 1e-2, format!("E≤1 under u+: {b1_u:.2e}"))?;
    let b1_a = median(FlagKind::Backward, 1, FlowKind::Geodesic, 1.0)?;
    let b2_a = median(FlagKind::Backward, 2, FlowKind::Geodesic, 1.0)?;
    ensure(b1_a.max(b2_a) <= 1e-2, format!("E≤j under a^t: {b1_a:.2e}, {b2_a:.2e}"))?;
    let f2_u = median(FlagKind::Forward, 2, FlowKind::HorocyclePlus, 1.0)?;
    ensure(f2_u >= 0.1, format!("E≥2 under u+ only moved {f2_u:.3}"))?;
    Ok(format!("E≤1·u+ {b1_u:.1e}, E≤1·a {b1_a:.1e}, E≤2·a {b2_a:.1e}, E≥2·u+ {f2_u:.2}"))
}

fn c8_unique_ergodicity() -> Outcome {
    let rep = sym(2);
    let family = TestFamily::quadform_bump(rep.dim());
    let run = |t: f64| unique_ergodicity_gap(&rep, &lat(), 10, t, 1.0, &family, 17).map_err(|e| e.to_string());
    let r1 = run(1e4)?;
    let r2 = run(2e4)?;
    ensure(!r1.flagged && !r2.flagged, "more than 20% of starts truncated")?;
    ensure(r1.gap <= 0.05, format!("spread {:.3} at T = 1e4", r1.gap))?;
    ensure(r2.gap < r1.gap, format!("spread did not decrease: {:.4} → {:.4}", r1.gap, r2.gap))?;
    Ok(format!("spread {:.4} at T=1e4, {:.4} at T=2e4", r1.gap, r2.gap))
}

fn c9_origami() -> Outcome {
    let err = |e: cocycle_lab::Error| e.to_string();
    let torus = KzCocycle::new(&Origami::torus(), 10).map_err(err)?;
    let t = spectrum_of(&torus, &long_job(18))?;
    let terr = (t.raw_exponents[0] - 1.0).abs().max((t.raw_exponents[1] + 1.0).abs());
    ensure(terr <= 0.02, format!("torus {:?}", t.raw_exponents))?;

    let l = Origami::l_shaped(2, 2).map_err(err)?;
    ensure(l.n() == 3 && l.stratum().beta == vec![2] && l.genus() == 2, format!("L-shape is {} g={}", l.stratum(), l.genus()))?;
    let kz = KzCocycle::new(&l, 100).map_err(err)?;
    for k in 0..kz.sheet_count() {
        for m in Move::ALL {
            let (target, mat) = kz.step(k, m);
            let pulled = mat.transpose().checked_mul(kz.intersection(target)).and_then(|x| x.checked_mul(mat));
            ensure(pulled.as_ref() == Some(kz.intersection(k)), format!("step {m:?} from sheet {k} not symplectic"))?;
        }
    }
    let rel = l.to_string();
    // −I = S² = (ST)³ fixes every origami, so these are closed paths
    for text in ["S^2", "S^1 T^1 S^1 T^1 S^1 T^1", "S^4"] {
        let m = kz.homology_action(&lat().parse_word(text).map_err(err)?).map_err(err)?;
        ensure(is_symplectic(&m, kz.intersection(0)), format!("{text} not symplectic"))?;
    }

    // λ₂ = 1/3 was pinned from two disjoint-seed runs and frozen here
    const LAMBDA2: f64 = 1.0 / 3.0;
    let a = spectrum_of(&kz, &long_job(19))?;
    let b = spectrum_of(&kz, &long_job(20))?;
    for s in [&a, &b] {
        ensure((s.raw_exponents[1] - LAMBDA2).abs() <= 0.02, format!("{rel}: λ₂ = {:.4}", s.raw_exponents[1]))?;
        ensure(s.symmetry_defect() <= 0.02, format!("{rel}: symmetry defect {:.3}", s.symmetry_defect()))?;
    }
    let family: Vec<Origami> =
        [(2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4)].iter().map(|&(p, q)| Origami::l_shaped(p, q).unwrap()).collect();
    let table = exponent_family_experiment(&family, &SpectrumJob::geodesic(8, 6250, 21), 10_000).map_err(err)?;
    ensure(table.stratum.as_deref() == Some("H(2)"), "family not in H(2)")?;
    for r in &table.rows {
        ensure(r.error.is_none(), format!("{}: {}", r.origami, r.error.clone().unwrap_or_default()))?;
    }
    let spread = table.dispersion[1];
    ensure(spread <= 0.04, format!("family λ₂ dispersion {spread:.3}"))?;
    let sizes: Vec<usize> = table.rows.iter().map(|r| r.squares).collect();
    Ok(format!(
        "torus err {terr:.1e}; L: H(2) g=2, λ₂ {:.4}/{:.4}, sym {:.1e}; family {sizes:?} λ₂ spread {spread:.3}",
        a.raw_exponents[1],
        b.raw_exponents[1],
        a.symmetry_defect().max(b.symmetry_defect())
    ))
}

fn c10_reproducibility() -> Outcome {
    let configs = [
        "kind = \"spectrum\"\nseed = 4\n[representation]\nkind = \"sym\"\npower = 2\n[spectrum]\ntrajectories = 6\nhorizon = 2000\n",
        "kind = \"flags\"\nseed = 5\n[representation]\nkind = \"sym\"\npower = 2\n[spectrum]\ntrajectories = 4\nhorizon = 1500\n\
         [flags]\npoints = 8\nhorizon = 50\n",
        "kind = \"origami\"\nseed = 6\n[origami]\nsurfaces = [\"3; (1,2); (1,3)\", \"4; (1,2,3); (1,4)\"]\n\
         [spectrum]\ntrajectories = 4\nhorizon = 1000\n",
    ];
    let mut checked = 0;
    for text in configs {
        let cfg: ExperimentConfig = validate_config(text).map_err(|e| e.to_string())?;
        let blobs: Vec<String> = [1, 1, 4]
            .into_iter()
            .map(|threads| {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
                pool.install(|| serde_json::to_string_pretty(&compute(&cfg).0).unwrap())
            })
            .collect();
        ensure(blobs.windows(2).all(|w| w[0] == w[1]), format!("{} results differ between runs", cfg.kind))?;
        checked += 1;
    }
    Ok(format!("{checked} experiments byte-identical across reruns and 1/4 threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("cocycle identities", c1_cocycle_identities),
        ("exponent oracles", c2_exponent_oracles),
        ("determinant sum rule", c3_sum_rule),
        ("Furstenberg consistency", c4_furstenberg),
        ("E1 concentration", c5_e1_concentration),
        ("zero-one dichotomy", c6_zero_one),
        ("flag equivariance", c7_flag_equivariance),
        ("unique ergodicity", c8_unique_ergodicity),
        ("origami suite", c9_origami),
        ("reproducibility", c10_reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}

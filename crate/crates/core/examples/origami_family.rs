//! Kontsevich–Zorich exponents across L-shaped origamis with 3 to 8 squares,
//! all in H(2): the second exponent agrees across the family.

use cocycle_lab::origami::{exponent_family_experiment, Origami};
use cocycle_lab::oseledets::SpectrumJob;

fn main() -> cocycle_lab::Result<()> {
    let family: Vec<Origami> = [(2, 2), (3, 2), (3, 3), (4, 3), (4, 4), (5, 4)]
        .into_iter()
        .map(|(a, b)| Origami::l_shaped(a, b))
        .collect::<cocycle_lab::Result<_>>()?;
    let table = exponent_family_experiment(&family, &SpectrumJob::geodesic(8, 6250, 1), 10_000)?;
    println!("stratum {}", table.stratum.as_deref().unwrap_or("-"));
    for r in &table.rows {
        match (&r.exponents, &r.error) {
            (Some(x), _) => println!("{:>2} squares, orbit {:>4}: λ2 = {:.4}", r.squares, r.orbit_size.unwrap_or(0), x[1]),
            (None, Some(e)) => println!("{:>2} squares: failed: {e}", r.squares),
            _ => {}
        }
    }
    println!("λ2 dispersion across the family: {:.4}", table.dispersion[1]);
    let mut csv = Vec::new();
    table.write_csv(&mut csv).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&csv));
    Ok(())
}

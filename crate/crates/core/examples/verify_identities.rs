//! `X = u₂²∇u` and `∇·(D X) = 0` hold exactly in the continuum; on the grid
//! both residuals should fall by about 4 each time `h` halves.

use transport_recon::grid::Grid2D;
use transport_recon::scenario::{generate_data, Scenario, SolverSettings};
use transport_recon::transport::{build_transport_data, divergence_residual, identity_residual};

fn main() -> transport_recon::Result<()> {
    let sc = Scenario::smooth_bump();
    println!("{:>5} {:>12} {:>7} {:>12} {:>7}", "n", "identity", "ratio", "divergence", "ratio");
    let mut prev: Option<(f64, f64)> = None;
    for n in [33, 65, 129] {
        let g = Grid2D::square(n)?;
        let data = generate_data(&sc, g, 4, SolverSettings::default())?;
        let td = build_transport_data(&data.u1, &data.u2)?;
        let id = identity_residual(&td).max();
        let div = divergence_residual(&data.truth.d, &td)?;
        let (r1, r2) = prev.map_or((f64::NAN, f64::NAN), |(a, b)| (a / id, b / div));
        println!("{n:>5} {id:>12.3e} {r1:>7.2} {div:>12.3e} {r2:>7.2}");
        prev = Some((id, div));
    }
    Ok(())
}

//! Solves `∇·(D∇u) − σu = 0` for the log scenario and compares with the
//! closed form `u = ln(1+x)/ln 2` as the grid is refined.
//!
//! ```bash
//! cargo run --example forward_solve
//! ```

use transport_recon::forward::{check_positivity, default_max_iter, solve_dirichlet_with_stats, DEFAULT_TOL};
use transport_recon::grid::Grid2D;
use transport_recon::scenario::Scenario;

fn main() -> transport_recon::Result<()> {
    let sc = Scenario::log();
    let exact = sc.exact_solution(sc.f1).expect("log scenario has a closed form");
    println!("D = {}, sigma = {}, f1 = {}", sc.d, sc.sigma, sc.f1);
    println!("{:>5} {:>6} {:>12} {:>8}", "n", "iters", "max error", "ratio");

    let mut prev: Option<f64> = None;
    for n in [17, 33, 65, 129] {
        let g = Grid2D::square(n)?;
        let coeffs = sc.coefficients(g)?;
        let (f1, _) = sc.boundary(g)?;
        let (u, stats) = solve_dirichlet_with_stats(&coeffs, &f1, DEFAULT_TOL, default_max_iter(&g))?;
        let err = (0..g.len())
            .map(|k| {
                let (i, j) = g.coords(k);
                (u.at(i, j) - exact.eval(g.x(i), g.y(j))).abs()
            })
            .fold(0.0, f64::max);
        let ratio = prev.map_or(String::from("-"), |p| format!("{:.2}", p / err));
        println!("{n:>5} {:>6} {err:>12.3e} {ratio:>8}", stats.iterations);
        prev = Some(err);
    }

    // f₁ vanishes on x = 0, so the maximum principle is checked on u₂ instead
    let g = Grid2D::square(65)?;
    let (_, f2) = sc.boundary(g)?;
    let u2 = solve_dirichlet_with_stats(&sc.coefficients(g)?, &f2, DEFAULT_TOL, default_max_iter(&g))?.0;
    let pos = check_positivity(&u2, &f2)?;
    println!("u2 positive: {} (min {:.6} at ({}, {}))", pos.pass, pos.min_value, pos.min_x, pos.min_y);
    Ok(())
}

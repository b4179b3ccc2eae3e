//! Traces boundary-seeded streamlines of `X = u₂∇u₁ − u₁∇u₂` for the smooth
//! bump scenario and reports how they end.

use transport_recon::grid::Grid2D;
use transport_recon::reconstruction::TerminationCounts;
use transport_recon::scenario::{generate_data, Scenario, SolverSettings};
use transport_recon::streamline::{reparametrize, seed_boundary, trace_seeds, TraceParams};
use transport_recon::transport::build_transport_data;

fn main() -> transport_recon::Result<()> {
    let g = Grid2D::square(65)?;
    let data = generate_data(&Scenario::smooth_bump(), g, 4, SolverSettings::default())?;
    let td = build_transport_data(&data.u1, &data.u2)?;
    let params = TraceParams::defaults(td.x());

    let seeds = seed_boundary(&td, 4.0 * g.h_min(), params.stagnation_eps)?;
    let lines = trace_seeds(&td, &seeds, &params)?;
    println!("{} seeds, {} streamlines", seeds.len(), lines.len());
    println!("{:?}", TerminationCounts::tally(&lines));

    let longest = lines
        .iter()
        .max_by(|a, b| a.arc_length().total_cmp(&b.arc_length()))
        .expect("at least one streamline");
    // same curve, retimed for the field D·X
    let retimed = reparametrize(longest, &data.truth.d)?;
    println!(
        "longest: ({:.3}, {:.3}) -> ({:.3}, {:.3}), arc {:.4}, t = {:.4} (X) / {:.4} (D·X), u rises by {:.4}",
        longest.start().x,
        longest.start().y,
        longest.end().x,
        longest.end().y,
        longest.arc_length(),
        longest.duration(),
        retimed.duration(),
        longest.direction.sign() * (longest.points.last().unwrap().u - longest.points[0].u),
    );
    Ok(())
}

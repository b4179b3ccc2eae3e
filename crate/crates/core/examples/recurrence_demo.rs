//! A rigid rotation keeps returning near its start; the divergence-free
//! field `D·X` never does, because `u = u₁/u₂` grows strictly along it.

use transport_recon::grid::{Grid2D, Point};
use transport_recon::recurrence::{count_returns, monotonicity_report, rotational_field, time_one_map};
use transport_recon::scenario::{generate_data, Scenario, SolverSettings};
use transport_recon::transport::build_transport_data;

fn main() -> transport_recon::Result<()> {
    let g = Grid2D::square(65)?;
    let (k, radius) = (100, 0.05);

    let rot = time_one_map(&rotational_field(g), Point::new(0.5, 0.45), k)?;
    println!("rotation: {} returns within {radius} over K = {k}", count_returns(&rot, radius)?);

    let data = generate_data(&Scenario::smooth_bump(), g, 4, SolverSettings::default())?;
    let td = build_transport_data(&data.u1, &data.u2)?;
    let dx = td.x().scaled_by(&data.truth.d)?;
    // D·X crosses the square in about a unit of time. A constant multiple of
    // D is still a valid D, and the slower orbit shows many increments.
    let slow_d = data.truth.d.map(|v| 0.02 * v)?;
    let slow = td.x().scaled_by(&slow_d)?;
    for x0 in [Point::new(0.25, 0.25), Point::new(0.5, 0.5), Point::new(0.75, 0.6)] {
        let orbit = time_one_map(&dx, x0, k)?;
        println!(
            "D·X from ({:.2}, {:.2}): escaped at {:?}, {} returns",
            x0.x,
            x0.y,
            orbit.escaped_at,
            count_returns(&orbit, radius)?,
        );
        let orbit = time_one_map(&slow, x0, k)?;
        let report = monotonicity_report(&td, &slow_d, &orbit)?;
        println!(
            "  0.02·D·X: {} increments, min {:.3e} >= bound {:.3e}, {} violations",
            report.increments.len(),
            report.min_increment,
            report.bound,
            report.violations,
        );
    }
    Ok(())
}

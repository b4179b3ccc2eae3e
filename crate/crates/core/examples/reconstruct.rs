//! Full pipeline on the smooth bump scenario at 129×129: refined-grid data,
//! transport field, streamlines, `D` along them, then `σ`.

use transport_recon::grid::Grid2D;
use transport_recon::reconstruction::{reconstruct, ReconOptions, ReconstructionMetrics};
use transport_recon::scenario::{generate_data, Scenario, SolverSettings};
use transport_recon::streamline::TraceParams;
use transport_recon::transport::build_transport_data;

fn main() -> transport_recon::Result<()> {
    let g = Grid2D::square(129)?;
    let data = generate_data(&Scenario::smooth_bump(), g, 4, SolverSettings::default())?;
    let td = build_transport_data(&data.u1, &data.u2)?;
    let opts = ReconOptions::with_spacing(g.h_min(), TraceParams::defaults(td.x()))?;
    let rec = reconstruct(&td, &data.d_boundary, &opts)?;
    let m = ReconstructionMetrics::compute(&rec, &data.truth);

    println!("streamlines        {}", rec.streamlines.len());
    println!("coverage           {:.4}", rec.coverage_fraction());
    println!("{m:#?}");
    Ok(())
}

//! Coverage fraction against seed count on the smooth bump scenario, and a
//! PGM of the densest run in `out/coverage_study/`.

use std::path::Path;

use transport_recon::grid::Grid2D;
use transport_recon::io::write_coverage_pgm;
use transport_recon::reconstruction::{reconstruct, ReconOptions};
use transport_recon::scenario::{generate_data, Scenario, SolverSettings};
use transport_recon::streamline::TraceParams;
use transport_recon::transport::build_transport_data;

fn main() -> transport_recon::Result<()> {
    let g = Grid2D::square(129)?;
    let data = generate_data(&Scenario::smooth_bump(), g, 4, SolverSettings::default())?;
    let td = build_transport_data(&data.u1, &data.u2)?;
    let trace = TraceParams::defaults(td.x());

    let mut last = None;
    println!("{:>7} {:>9}", "seeds", "coverage");
    for spacing in [32.0, 16.0, 8.0, 4.0, 2.0, 1.0].map(|m| m * g.h_min()) {
        let opts = ReconOptions::with_spacing(spacing, trace)?;
        let rec = reconstruct(&td, &data.d_boundary, &opts)?;
        println!("{:>7} {:>9.4}", opts.seed_count, rec.coverage_fraction());
        last = Some(rec);
    }
    let path = Path::new("out/coverage_study/coverage.pgm");
    write_coverage_pgm(path, &last.expect("ran at least once").coverage)?;
    println!("wrote {}", path.display());
    Ok(())
}

//! Modified-scattering diagnostics on the default nonlinear run.
//!
//! ```bash
//! cargo run --release --example asymptotics [config]
//! ```

use distorted_nls::cli::{asymptotics_report, nls_run, static_setup};
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let run = nls_run(&cfg)?;
    let st = static_setup(&cfg)?;
    let (rep, msr) = asymptotics_report(&run, &st, &cfg)?;
    for (t, r) in &msr.ode_residual_norms {
        println!("t = {t:>7.2}   residual {r:.3e}");
    }
    for g in &rep.cauchy_gaps {
        println!("‖w({}) - w({})‖∞ = {:.3e}", g.t2, g.t1, g.gap);
    }
    for p in &rep.physical {
        println!("t = {:>5.0}   linear {:.3e}   modified {:?}", p.t, p.lin_err, p.mod_err);
    }
    for s in &rep.stationary_phase {
        println!("stationary phase t = {:>6.0}: rel err {:.3e}", s.t, s.relative_error());
    }
    Ok(())
}

//! Small-data defocusing run: invariants, profile bound and sup-norm decay.
//!
//! ```bash
//! cargo run --release --example solve [config]
//! ```

use distorted_nls::cli::{nls_run, solve_report};
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let run = nls_run(&cfg)?;
    for s in run.traj.states.iter().filter(|s| s.t.fract() == 0.0 && (s.t as u64).is_multiple_of(25)) {
        let sup = s.u.iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!("t = {:>6.1}   ‖u‖∞ = {sup:.6e}", s.t);
    }
    let rep = solve_report(&run, &cfg, false)?;
    println!("mass drift   {:.3e}", rep.mass_drift);
    println!("energy drift {:.3e}", rep.energy_drift);
    println!("sup ‖f̃‖∞/η   {:.4}", rep.profile_sup_over_eta);
    if let Some(s) = rep.sup_decay_slope {
        println!("‖u‖∞ slope   {s:.4}");
    }
    Ok(())
}

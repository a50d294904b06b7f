//! Transmission and reflection for the default barrier, checked against
//! the transfer-matrix closed form.
//!
//! ```bash
//! cargo run --release --example scatter [config]
//! ```

use distorted_nls::cli::scatter_report;
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let (rep, s) = scatter_report(&cfg)?;
    let n = s.ks.len();
    println!("{:>10} {:>12} {:>12}", "k", "|T|", "|R+|");
    for j in (n / 2..n).step_by(n / 32) {
        println!("{:>10.4} {:>12.8} {:>12.8}", s.ks[j], s.t[j].norm(), s.r_plus[j].norm());
    }
    println!("identity defect  {:.3e}", rep.defects.max());
    if let Some(e) = rep.oracle_rel_err {
        println!("oracle rel err   {e:.3e}");
    }
    println!("generic          {}", s.generic);
    Ok(())
}

//! Plancherel, diagonalisation and the singular/regular split of the
//! distorted Fourier basis.
//!
//! ```bash
//! cargo run --release --example dft-check [config]
//! ```

use distorted_nls::cli::{dft_report, static_setup};
use distorted_nls::runstore::RunConfig;

fn main() -> distorted_nls::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(p) => RunConfig::load(p.as_ref())?,
        None => RunConfig::default(),
    };
    let st = static_setup(&cfg)?;
    let rep = dft_report(&st, &cfg.potential)?;
    println!("plancherel ratio         {:.12}", rep.plancherel_ratio);
    println!("round trip               {:.3e}", rep.round_trip);
    println!("diagonalization residual {:.3e}", rep.diagonalization_residual);
    if let Some(v) = rep.vanishing_probe {
        println!("|f̃(1e-4)|/‖f̃‖∞           {v:.3e}");
    }
    println!("split defect             {:.3e}", rep.split_defect);
    for c in &rep.checks {
        println!("{} {}", if c.pass { "ok  " } else { "FAIL" }, c.name);
    }
    Ok(())
}

//! A reduced experiment: baseline, CoRN and RANDOM at K = 1 and 3.

use corn::cli::{run_experiment, ExperimentConfig};

fn main() -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::ltcf_default();
    cfg.k_list = vec![1, 3];
    cfg.sim.replicates = 100;
    let dir = std::env::temp_dir().join("corn-experiment-example");
    let (report, files) = run_experiment(&cfg, &dir)?;
    println!("rho {:.2e}, baseline mean {:.2}", report.rho, report.baseline.mean_infections);
    for m in &report.methods {
        if let Some(a) = &m.infections {
            println!("{:>12} K={} mean {:.2} reach {:.1}%", m.method, m.k, a.mean_infections, a.reach_pct);
        }
    }
    println!("{} files in {}", files.len(), dir.display());
    Ok(())
}

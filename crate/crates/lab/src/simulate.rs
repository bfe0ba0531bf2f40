//! One logged run of the full equation from the basic ansatz at the first `ε`.

use std::fmt::Write as _;
use std::path::Path;

use packetlab_core::nls::{assemble_psi, AnsatzGrids, AnsatzOrder};
use packetlab_core::solver::{run, RunLog, SolverConfig};
use packetlab_core::spectral::Field;

use crate::config::ExperimentConfig;
use crate::experiments::initial_envelope;
use crate::report::write_file;
use crate::LabError;

pub struct Simulation {
    pub eps: f64,
    pub log: RunLog,
    pub final_field: Field,
}

pub fn simulate(cfg: &ExperimentConfig) -> Result<Simulation, LabError> {
    cfg.validate()?;
    let p = cfg.carrier()?;
    let eps = cfg.eps_list[0];
    let grids = AnsatzGrids::new(&p, eps, &cfg.grid_spec())?;
    let env = initial_envelope(cfg, grids.slow())?;
    let u0 = assemble_psi(&grids, &env, 0.0, AnsatzOrder::Basic, cfg.radius())?.scaled_psi();
    let mut sc = SolverConfig::new(cfg.dt, cfg.t0 / (eps * eps));
    sc.observer_stride = ((cfg.observer_interval / sc.effective_dt()).round() as usize).max(1);
    sc.log_sobolev_index = cfg.s as f64;
    let (state, log) = run(&u0, &sc, &mut [])?;
    Ok(Simulation { eps, log, final_field: state.u })
}

impl Simulation {
    /// Writes `run_log.json` and `final_state.csv` (`x,u`).
    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        write_file(&dir.join("run_log.json"), &serde_json::to_string_pretty(&self.log)?)?;
        let mut csv = String::from("x,u\n");
        for (x, u) in self.final_field.grid().points().zip(self.final_field.samples()) {
            let _ = writeln!(csv, "{x:?},{:?}", u.re);
        }
        write_file(&dir.join("final_state.csv"), &csv)
    }
}

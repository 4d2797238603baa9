//! Flat key=value experiment configuration.
//!
//! Every parameter has an embedded default; a config file overrides any
//! subset. Lines are `key = value` with `#` comments, no nesting, and
//! parsing then serializing is idempotent. The effective configuration is
//! printed to stderr on every run for provenance.

use anyhow::{anyhow, bail, Result};

/// Known experiment ids with a one-line account of the identity each one
/// verifies.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("exc-cov", "excursion occupation covariance of two discs vs 4x Green quadrature"),
    ("loop-cov", "loop occupation covariance of two discs vs squared-Green quadrature"),
    ("tau-mass", "excursion lifetime mass vs twice the disc area"),
    ("dirichlet", "boundary-weighted occupation vs twice the harmonic-extension integral"),
    ("moments-p", "time-ordered occupation moment vs the chained Green quadrature"),
    ("intersection", "pair-intersection covariance vs 16x squared-Green quadrature"),
    ("gff-fluct", "cloud fluctuation covariance vs the Gaussian-field prediction, with kurtosis contraction"),
    ("loop-soup", "signed loop-soup fluctuation variance vs squared-Green quadrature"),
    ("oracle-exact", "lattice dynamic programs vs closed-form Green factorizations, tail-bounded"),
    ("quad-selfcheck", "deterministic radial-chain and boundary-kernel values vs closed forms"),
    ("calibrate", "lattice-to-continuum constants by Richardson extrapolation over three spacings"),
];

pub fn known_experiment(id: &str) -> bool {
    EXPERIMENTS.iter().any(|(name, _)| *name == id)
}

/// One disc region as center and radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscSpec {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub workers: usize,
    pub n: u64,
    pub eps: f64,
    pub dt: f64,
    pub tol: f64,
    pub eps_rel: f64,
    pub dt_rel: f64,
    pub r_floor: f64,
    pub eps_moll: f64,
    pub n_clouds: usize,
    pub n_replicas: usize,
    pub intensity: f64,
    pub p: usize,
    pub lattice_n: u32,
    pub a: DiscSpec,
    pub b: DiscSpec,
    pub c: DiscSpec,
    pub out: Option<String>,
}

impl ExperimentConfig {
    /// Embedded defaults for one experiment. The excursion-side estimators
    /// run at eps = 0.01, dt = 1e-5, n = 1e6, 5% tolerance; loop- and
    /// intersection-side tolerances are looser because their start-offset
    /// and mollifier approximations bite harder.
    pub fn defaults_for(experiment: &str) -> Result<Self> {
        if !known_experiment(experiment) {
            bail!(
                "unknown experiment '{experiment}'; known ids: {}",
                EXPERIMENTS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
            );
        }
        let mut cfg = ExperimentConfig {
            experiment: experiment.to_string(),
            seed: 42,
            workers: 0,
            n: 1_000_000,
            eps: 0.01,
            dt: 1e-5,
            tol: 0.05,
            eps_rel: 0.05,
            dt_rel: 1e-5,
            r_floor: 0.0,
            eps_moll: 0.05,
            n_clouds: 16,
            n_replicas: 1_500,
            intensity: 1.0,
            p: 3,
            lattice_n: 5,
            a: DiscSpec { cx: -0.4, cy: 0.0, r: 0.25 },
            b: DiscSpec { cx: 0.4, cy: 0.0, r: 0.25 },
            c: DiscSpec { cx: 0.3, cy: 0.0, r: 0.07 },
            out: None,
        };
        match experiment {
            "tau-mass" => cfg.tol = 0.03,
            "dirichlet" => cfg.a = DiscSpec { cx: 0.3, cy: 0.0, r: 0.2 },
            "moments-p" => {
                cfg.tol = 0.10;
                cfg.a = DiscSpec { cx: -0.4, cy: 0.0, r: 0.2 };
                cfg.b = DiscSpec { cx: 0.4, cy: 0.0, r: 0.2 };
                cfg.c = DiscSpec { cx: 0.0, cy: 0.45, r: 0.18 };
            }
            "loop-cov" => {
                cfg.tol = 0.15;
                cfg.n = 200_000;
            }
            "intersection" => {
                cfg.tol = 0.25;
                cfg.n = 100_000;
            }
            "gff-fluct" => {
                cfg.tol = 0.07;
                cfg.eps = 0.05;
                cfg.dt = 6.25e-4;
            }
            "loop-soup" => {
                cfg.tol = 0.20;
                cfg.eps_rel = 0.08;
                cfg.dt_rel = 1e-4;
                cfg.r_floor = 0.5;
                cfg.n_clouds = 4;
                cfg.n_replicas = 800;
                cfg.a = DiscSpec { cx: 0.62, cy: 0.0, r: 0.12 };
                cfg.b = DiscSpec { cx: 0.62, cy: 0.0, r: 0.2 };
            }
            _ => {}
        }
        Ok(cfg)
    }

    /// Applies `key = value` lines from a config file over the defaults.
    /// Unknown keys, malformed lines, and unparsable values are rejected
    /// with the line number.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(cut) => &raw[..cut],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {lineno}: expected 'key = value', got '{line}'"))?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                bail!("line {lineno}: key '{key}' has no value");
            }
            self.set(key, value)
                .map_err(|e| anyhow!("line {lineno}: key '{key}': {e}"))?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn float(v: &str) -> Result<f64> {
            v.parse::<f64>().map_err(|_| anyhow!("invalid number '{v}'"))
        }
        fn int<T: std::str::FromStr>(v: &str) -> Result<T> {
            v.parse::<T>().map_err(|_| anyhow!("invalid integer '{v}'"))
        }
        match key {
            "experiment" => {
                if !known_experiment(value) {
                    bail!("unknown experiment '{value}'");
                }
                if value != self.experiment {
                    bail!(
                        "config is for experiment '{value}' but the command selected '{}'",
                        self.experiment
                    );
                }
            }
            "seed" => self.seed = int(value)?,
            "workers" => self.workers = int(value)?,
            "n" => self.n = int(value)?,
            "eps" => self.eps = float(value)?,
            "dt" => self.dt = float(value)?,
            "tol" => self.tol = float(value)?,
            "eps_rel" => self.eps_rel = float(value)?,
            "dt_rel" => self.dt_rel = float(value)?,
            "r_floor" => self.r_floor = float(value)?,
            "eps_moll" => self.eps_moll = float(value)?,
            "n_clouds" => self.n_clouds = int(value)?,
            "n_replicas" => self.n_replicas = int(value)?,
            "intensity" => self.intensity = float(value)?,
            "p" => self.p = int(value)?,
            "lattice_n" => self.lattice_n = int(value)?,
            "a_cx" => self.a.cx = float(value)?,
            "a_cy" => self.a.cy = float(value)?,
            "a_r" => self.a.r = float(value)?,
            "b_cx" => self.b.cx = float(value)?,
            "b_cy" => self.b.cy = float(value)?,
            "b_r" => self.b.r = float(value)?,
            "c_cx" => self.c.cx = float(value)?,
            "c_cy" => self.c.cy = float(value)?,
            "c_r" => self.c.r = float(value)?,
            "out" => self.out = Some(value.to_string()),
            other => bail!("unknown key '{other}'"),
        }
        Ok(())
    }

    /// Serializes every setting in a fixed order; parsing the result back
    /// reproduces the configuration exactly.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("experiment", self.experiment.clone());
        push("seed", self.seed.to_string());
        push("workers", self.workers.to_string());
        push("n", self.n.to_string());
        push("eps", self.eps.to_string());
        push("dt", self.dt.to_string());
        push("tol", self.tol.to_string());
        push("eps_rel", self.eps_rel.to_string());
        push("dt_rel", self.dt_rel.to_string());
        push("r_floor", self.r_floor.to_string());
        push("eps_moll", self.eps_moll.to_string());
        push("n_clouds", self.n_clouds.to_string());
        push("n_replicas", self.n_replicas.to_string());
        push("intensity", self.intensity.to_string());
        push("p", self.p.to_string());
        push("lattice_n", self.lattice_n.to_string());
        push("a_cx", self.a.cx.to_string());
        push("a_cy", self.a.cy.to_string());
        push("a_r", self.a.r.to_string());
        push("b_cx", self.b.cx.to_string());
        push("b_cy", self.b.cy.to_string());
        push("b_r", self.b.r.to_string());
        push("c_cx", self.c.cx.to_string());
        push("c_cy", self.c.cy.to_string());
        push("c_r", self.c.r.to_string());
        if let Some(out) = &self.out {
            push("out", out.clone());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_idempotent() {
        let mut cfg = ExperimentConfig::defaults_for("exc-cov").unwrap();
        cfg.seed = 7;
        cfg.eps = 0.02;
        cfg.out = Some("row.csv".into());
        let text = cfg.serialize();
        let mut reparsed = ExperimentConfig::defaults_for("exc-cov").unwrap();
        reparsed.apply_file(&text).unwrap();
        assert_eq!(reparsed, cfg);
        assert_eq!(reparsed.serialize(), text);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut cfg = ExperimentConfig::defaults_for("tau-mass").unwrap();
        cfg.apply_file("# a comment\n\n  seed = 9 # trailing\n").unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn malformed_lines_carry_diagnostics() {
        let mut cfg = ExperimentConfig::defaults_for("tau-mass").unwrap();
        let err = cfg.apply_file("seed = 1\nnonsense\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
        let err = cfg.apply_file("eps = fast\n").unwrap_err().to_string();
        assert!(err.contains("eps") && err.contains("line 1"), "{err}");
        let err = cfg.apply_file("volume = 3\n").unwrap_err().to_string();
        assert!(err.contains("unknown key"), "{err}");
    }

    #[test]
    fn experiment_key_must_match_the_command() {
        let mut cfg = ExperimentConfig::defaults_for("tau-mass").unwrap();
        assert!(cfg.apply_file("experiment = tau-mass\n").is_ok());
        let err = cfg.apply_file("experiment = exc-cov\n").unwrap_err().to_string();
        assert!(err.contains("selected"), "{err}");
    }

    #[test]
    fn unknown_experiment_is_rejected() {
        assert!(ExperimentConfig::defaults_for("warp-drive").is_err());
        assert!(known_experiment("loop-soup"));
        assert!(!known_experiment("loop-Soup"));
    }
}

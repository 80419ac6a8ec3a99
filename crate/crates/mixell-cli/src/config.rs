//! Flat key-value configuration: one `key = value` per line, dotted
//! section keys, `#` starts a comment. Every key has a default equal to
//! the reference desk setup, so an empty file is a valid experiment.
//! Unknown and duplicated keys are rejected outright; a typo must not
//! fall back to a default silently.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use mixell::verify::VerifySettings;
use mixell::DomainSpec;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub h: f64,
    pub quad_order: usize,
    pub q: f64,
    pub p: f64,
    /// Multiples of λ* swept by the nehari command.
    pub lambda_fractions: Vec<f64>,
    pub schedule: Vec<u64>,
    pub linear_tol: f64,
    pub outer_tol: f64,
    pub eigen_tol: f64,
    pub opt_tol: f64,
    pub nehari_tol: f64,
    pub recon_tol: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainSpec {
                a: 0.0,
                b: 1.0,
                collar_width: 0.5,
                s: 0.5,
                kernel_constant: 1.0,
            },
            h: 1.0 / 32.0,
            quad_order: 6,
            q: 0.5,
            p: 3.0,
            lambda_fractions: vec![0.1, 0.3, 0.5],
            schedule: vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024],
            linear_tol: 1e-12,
            outer_tol: 1e-11,
            eigen_tol: 1e-12,
            opt_tol: 1e-12,
            nehari_tol: 1e-10,
            recon_tol: 0.02,
            seeds: vec![1, 2, 3],
            output_dir: PathBuf::from("out"),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, raw: &str) -> Result<T, String> {
    raw.parse()
        .map_err(|_| format!("config key {key}: cannot parse value {raw:?}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, raw: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, String> = raw
        .split_whitespace()
        .map(|tok| parse_num(key, tok))
        .collect();
    let items = items?;
    if items.is_empty() {
        return Err(format!("config key {key}: list must not be empty"));
    }
    Ok(items)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("config line {}: expected key = value", lineno + 1));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(format!("config key {key} given twice"));
            }
            match key {
                "domain.a" => cfg.domain.a = parse_num(key, value)?,
                "domain.b" => cfg.domain.b = parse_num(key, value)?,
                "domain.collar_width" => cfg.domain.collar_width = parse_num(key, value)?,
                "domain.s" => cfg.domain.s = parse_num(key, value)?,
                "domain.kernel_constant" => {
                    cfg.domain.kernel_constant = parse_num(key, value)?
                }
                "mesh.h" => cfg.h = parse_num(key, value)?,
                "quad.order" => cfg.quad_order = parse_num(key, value)?,
                "problem.q" => cfg.q = parse_num(key, value)?,
                "problem.p" => cfg.p = parse_num(key, value)?,
                "nehari.lambda_fractions" => cfg.lambda_fractions = parse_list(key, value)?,
                "schedule.levels" => cfg.schedule = parse_list(key, value)?,
                "tol.linear" => cfg.linear_tol = parse_num(key, value)?,
                "tol.outer" => cfg.outer_tol = parse_num(key, value)?,
                "tol.eigen" => cfg.eigen_tol = parse_num(key, value)?,
                "tol.opt" => cfg.opt_tol = parse_num(key, value)?,
                "tol.nehari" => cfg.nehari_tol = parse_num(key, value)?,
                "tol.reconstruction" => cfg.recon_tol = parse_num(key, value)?,
                "seeds" => cfg.seeds = parse_list(key, value)?,
                "output.dir" => cfg.output_dir = PathBuf::from(value),
                other => return Err(format!("unknown config key {other}")),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Command independent sanity: geometry and tolerance signs, schedule
    /// shape. Exponent ranges are checked per command, because q = 3 is a
    /// fine singular experiment and an invalid Sobolev one.
    pub fn validate(&self) -> Result<(), String> {
        self.domain
            .validate()
            .map_err(|e| format!("config: {e}"))?;
        if !(self.h > 0.0) {
            return Err("config: mesh.h must be positive".into());
        }
        if self.quad_order == 0 || self.quad_order > 64 {
            return Err("config: quad.order must lie in 1..=64".into());
        }
        for (name, t) in [
            ("tol.linear", self.linear_tol),
            ("tol.outer", self.outer_tol),
            ("tol.eigen", self.eigen_tol),
            ("tol.opt", self.opt_tol),
            ("tol.nehari", self.nehari_tol),
            ("tol.reconstruction", self.recon_tol),
        ] {
            if !(t > 0.0) || !t.is_finite() {
                return Err(format!("config: {name} must be a positive number"));
            }
        }
        if !self.schedule.windows(2).all(|w| w[0] < w[1]) {
            return Err("config: schedule.levels must be strictly increasing".into());
        }
        if self.schedule.is_empty() || self.seeds.is_empty() {
            return Err("config: schedule.levels and seeds must not be empty".into());
        }
        if !self.lambda_fractions.iter().all(|&f| f > 0.0 && f.is_finite()) {
            return Err("config: nehari.lambda_fractions must be positive".into());
        }
        Ok(())
    }

    pub fn apply_seed_offset(&mut self, offset: u64) {
        for s in &mut self.seeds {
            *s = s.wrapping_add(offset);
        }
    }

    /// Canonical text of the effective configuration: every key in fixed
    /// order with normalized number formatting. This is what gets hashed,
    /// so runs that differ only in output location share an identity.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x:.16e}");
        let list_u = |v: &[u64]| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        };
        let _ = writeln!(s, "domain.a = {}", f(self.domain.a));
        let _ = writeln!(s, "domain.b = {}", f(self.domain.b));
        let _ = writeln!(s, "domain.collar_width = {}", f(self.domain.collar_width));
        let _ = writeln!(s, "domain.s = {}", f(self.domain.s));
        let _ = writeln!(s, "domain.kernel_constant = {}", f(self.domain.kernel_constant));
        let _ = writeln!(s, "mesh.h = {}", f(self.h));
        let _ = writeln!(s, "quad.order = {}", self.quad_order);
        let _ = writeln!(s, "problem.q = {}", f(self.q));
        let _ = writeln!(s, "problem.p = {}", f(self.p));
        let _ = writeln!(
            s,
            "nehari.lambda_fractions = {}",
            self.lambda_fractions.iter().map(|x| f(*x)).collect::<Vec<_>>().join(" ")
        );
        let _ = writeln!(s, "schedule.levels = {}", list_u(&self.schedule));
        let _ = writeln!(s, "tol.linear = {}", f(self.linear_tol));
        let _ = writeln!(s, "tol.outer = {}", f(self.outer_tol));
        let _ = writeln!(s, "tol.eigen = {}", f(self.eigen_tol));
        let _ = writeln!(s, "tol.opt = {}", f(self.opt_tol));
        let _ = writeln!(s, "tol.nehari = {}", f(self.nehari_tol));
        let _ = writeln!(s, "tol.reconstruction = {}", f(self.recon_tol));
        let _ = writeln!(s, "seeds = {}", list_u(&self.seeds));
        s
    }

    pub fn settings(&self) -> VerifySettings {
        VerifySettings {
            spec: self.domain,
            h: self.h,
            quad_order: self.quad_order,
            q: self.q,
            p: self.p,
            schedule: self.schedule.clone(),
            seeds: self.seeds.clone(),
            linear_tol: self.linear_tol,
            outer_tol: self.outer_tol,
            eigen_tol: self.eigen_tol,
            opt_tol: self.opt_tol,
            nehari_tol: self.nehari_tol,
            recon_tol: self.recon_tol,
        }
    }
}

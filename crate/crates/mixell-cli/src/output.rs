//! Artifact writers. Everything textual is rendered through one float
//! formatter (17 significant digits, enough to round-trip f64) so that a
//! repeated run produces byte-identical files; the manifest carries no
//! timestamps for the same reason.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use mixell::verify::{InvariantOutcome, Status, REGISTRY};
use mixell::{GridFunction, Mesh};

pub fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(text: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

/// Nonzero entries of a dense symmetric matrix as `row,col,value` lines,
/// row-major. Structural zeros are skipped, so the dump doubles as a
/// sparsity record.
pub fn triplet_csv(m: &DMatrix<f64>) -> String {
    let mut s = String::from("row,col,value\n");
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(s, "{i},{j},{}", fnum(v));
            }
        }
    }
    s
}

/// Two-column nodal profile `x u`, one line per mesh node.
pub fn profile_text(mesh: &Mesh, u: &GridFunction) -> String {
    let mut s = String::new();
    for (i, &x) in mesh.nodes.iter().enumerate() {
        let _ = writeln!(s, "{} {}", fnum(x), fnum(u.values[i]));
    }
    s
}

/// Accumulates artifacts and invariant outcomes for one command run and
/// renders the manifest. Files are only written through this type, so the
/// manifest's artifact list is complete by construction.
pub struct ManifestBuilder {
    command: String,
    config_sha: String,
    seed_offset: u64,
    out_dir: PathBuf,
    artifacts: Vec<(String, String)>,
    outcomes: Vec<InvariantOutcome>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config_canonical: &str, seed_offset: u64, out_dir: &Path) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config_sha: sha256_hex(config_canonical),
            seed_offset,
            out_dir: out_dir.to_path_buf(),
            artifacts: Vec::new(),
            outcomes: Vec::new(),
        }
    }

    pub fn stage_artifact(&mut self, name: &str, contents: String) {
        self.artifacts.push((name.to_string(), contents));
    }

    pub fn record(&mut self, outcomes: Vec<InvariantOutcome>) {
        self.outcomes.extend(outcomes);
    }

    pub fn record_one(&mut self, id: &'static str, status: Status, detail: String) {
        self.outcomes.push(InvariantOutcome { id, status, detail });
    }

    pub fn any_failed(&self) -> bool {
        self.outcomes.iter().any(|o| o.status == Status::Fail)
    }

    pub fn outcomes(&self) -> &[InvariantOutcome] {
        &self.outcomes
    }

    /// Every registry invariant must appear exactly once. Suites that the
    /// command did not run are filled with explicit skips; a duplicate or
    /// an unknown id is a driver bug and fails the run.
    pub fn close_coverage(&mut self) -> Result<(), String> {
        for info in REGISTRY.iter() {
            let n = self.outcomes.iter().filter(|o| o.id == info.id).count();
            match n {
                0 => self.outcomes.push(InvariantOutcome {
                    id: info.id,
                    status: Status::Skip,
                    detail: format!("not exercised by {}", self.command),
                }),
                1 => {}
                _ => return Err(format!("invariant {} recorded {n} times", info.id)),
            }
        }
        for o in &self.outcomes {
            if !REGISTRY.iter().any(|info| info.id == o.id) {
                return Err(format!("invariant {} is not in the registry", o.id));
            }
        }
        // Render in registry order regardless of execution order.
        let mut ordered = Vec::with_capacity(REGISTRY.len());
        for info in REGISTRY.iter() {
            let idx = self.outcomes.iter().position(|o| o.id == info.id).unwrap();
            ordered.push(self.outcomes.remove(idx));
        }
        self.outcomes = ordered;
        Ok(())
    }

    fn manifest_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config_sha256 = {}", self.config_sha);
        let _ = writeln!(s, "seed_offset = {}", self.seed_offset);
        let _ = writeln!(s, "library_version = {}", mixell::VERSION);
        let _ = writeln!(s, "driver_version = {}", env!("CARGO_PKG_VERSION"));
        for (name, _) in &self.artifacts {
            let _ = writeln!(s, "artifact {name}");
        }
        let mut pass = 0usize;
        let mut fail = 0usize;
        let mut skip = 0usize;
        for o in &self.outcomes {
            match o.status {
                Status::Pass => pass += 1,
                Status::Fail => fail += 1,
                Status::Skip => skip += 1,
            }
            let _ = writeln!(s, "invariant {} {} {}", o.id, o.status.label(), o.detail);
        }
        let _ = writeln!(s, "summary pass={pass} fail={fail} skip={skip}");
        s
    }

    /// Writes all staged artifacts plus `manifest.txt` and returns the
    /// rendered manifest.
    pub fn write_all(&self) -> Result<String, String> {
        fs::create_dir_all(&self.out_dir)
            .map_err(|e| format!("cannot create {}: {e}", self.out_dir.display()))?;
        for (name, contents) in &self.artifacts {
            let path = self.out_dir.join(name);
            fs::write(&path, contents)
                .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        }
        let manifest = self.manifest_text();
        let path = self.out_dir.join("manifest.txt");
        fs::write(&path, &manifest)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        Ok(manifest)
    }
}

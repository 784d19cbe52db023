//! Adapter for an external TSPLIB solver binary such as LKH.
//!
//! For each instance a scratch directory receives `problem.atsp` and a
//! parameter file `params.par`; the binary is invoked with the parameter file
//! path as its only argument and must write a TSPLIB tour to the `TOUR_FILE`
//! named there. The tour then goes through the same post-processing as the
//! built-in solver's.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use super::{tsplib, AtspSolver, TourOrder, TspError, ZoneTspInstance};

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub binary: PathBuf,
    pub runs: u32,
    /// Parent directory for scratch files; the system temp dir when `None`.
    pub work_dir: Option<PathBuf>,
}

impl ExternalSolver {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        Self {
            binary: binary.into(),
            runs: 1,
            work_dir: None,
        }
    }

    fn err(&self, detail: impl Into<String>) -> TspError {
        TspError::External {
            path: self.binary.clone(),
            detail: detail.into(),
        }
    }

    /// Parameter file contents for one run.
    pub fn parameters(&self, problem: &Path, tour: &Path, seed: u64) -> String {
        let mut par = String::new();
        let _ = writeln!(par, "PROBLEM_FILE = {}", problem.display());
        let _ = writeln!(par, "TOUR_FILE = {}", tour.display());
        let _ = writeln!(par, "RUNS = {}", self.runs);
        let _ = writeln!(par, "SEED = {}", seed % (1 << 31));
        par
    }
}

impl AtspSolver for ExternalSolver {
    fn solve(&self, instance: &ZoneTspInstance, seed: u64) -> Result<TourOrder, TspError> {
        let n = instance.len();
        if n < 3 {
            // LKH rejects tiny instances; there is only one closed tour anyway
            return Ok(TourOrder((0..n).collect()));
        }
        let dir = match &self.work_dir {
            Some(d) => tempfile::tempdir_in(d),
            None => tempfile::tempdir(),
        }
        .map_err(|e| self.err(format!("cannot create scratch dir: {e}")))?;
        let problem = dir.path().join("problem.atsp");
        let tour_path = dir.path().join("solution.tour");
        let par_path = dir.path().join("params.par");
        fs::write(&problem, instance.to_tsplib()).map_err(|e| self.err(e.to_string()))?;
        fs::write(&par_path, self.parameters(&problem, &tour_path, seed)).map_err(|e| self.err(e.to_string()))?;

        let output = Command::new(&self.binary)
            .arg(&par_path)
            .current_dir(dir.path())
            .output()
            .map_err(|e| self.err(format!("failed to start: {e}")))?;
        if !output.status.success() {
            return Err(self.err(format!(
                "exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        let text = fs::read_to_string(&tour_path).map_err(|e| self.err(format!("no tour file: {e}")))?;
        Ok(TourOrder(tsplib::parse_tour(&text, n)?))
    }
}

//! Training sink writing the log CSV and checkpoint files into a run directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use iwsm_core::scorenet::{save_checkpoint, Checkpoint};
use iwsm_core::trainer::{StepRecord, TrainSink};
use iwsm_core::{Error, Result};

/// Writes `training_log.csv` (`step,loss,wall_ms,buffer_fill`) and
/// `ckpt_{step}.json` files under the output directory.
pub struct DirSink {
    dir: PathBuf,
    log: BufWriter<File>,
    started: Instant,
}

impl DirSink {
    pub fn new(dir: PathBuf) -> Result<Self> {
        fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        let log_path = dir.join("training_log.csv");
        let mut log = BufWriter::new(
            File::create(&log_path).map_err(|e| Error::Io(format!("{}: {e}", log_path.display())))?,
        );
        writeln!(log, "step,loss,wall_ms,buffer_fill").map_err(|e| Error::Io(e.to_string()))?;
        Ok(Self { dir, log, started: Instant::now() })
    }

    pub fn finish(mut self) -> Result<()> {
        self.log.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

impl TrainSink for DirSink {
    fn on_step(&mut self, rec: &StepRecord) {
        let wall_ms = self.started.elapsed().as_millis();
        let _ = writeln!(self.log, "{},{},{},{}", rec.step, rec.loss, wall_ms, rec.buffer_fill);
    }

    fn on_checkpoint(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let path = self.dir.join(format!("ckpt_{}.json", ckpt.training_step));
        save_checkpoint(ckpt, &path)
    }
}

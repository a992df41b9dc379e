//! The `simulate` command: one run written to an output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ctqw::ensemble::Snapshot;
use ctqw::{run, NormEvent, Precision, Result, RunReport, SnapshotSink};

use crate::config::{describe, LoadedConfig};
use crate::snapshot::write_density_snapshot;

pub const OBSERVABLES_FILE: &str = "observables.csv";
pub const PROFILE_FILE: &str = "profile.json";
pub const LOG_FILE: &str = "run.log";
pub const OBSERVABLES_HEADER: [&str; 4] = ["time", "name", "component_index", "value"];

/// Norm events written line by line to the log; the rest are only counted.
const LOGGED_EVENT_LIMIT: usize = 1000;

/// Writes observables rows, optional density snapshots and norm events.
pub struct OutputSink {
    dir: PathBuf,
    csv: csv::Writer<BufWriter<File>>,
    log: BufWriter<File>,
    density_snapshots: bool,
    precision: Precision,
    logged_events: usize,
    outputs: Vec<String>,
}

impl OutputSink {
    pub fn create(dir: &Path, density_snapshots: bool, precision: Precision, log: BufWriter<File>) -> Result<Self> {
        let mut csv = csv::Writer::from_writer(BufWriter::new(File::create(dir.join(OBSERVABLES_FILE))?));
        csv.write_record(OBSERVABLES_HEADER).map_err(csv_error)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            csv,
            log,
            density_snapshots,
            precision,
            logged_events: 0,
            outputs: vec![OBSERVABLES_FILE.to_string()],
        })
    }

    fn finish(mut self) -> Result<BufWriter<File>> {
        self.csv.flush()?;
        Ok(self.log)
    }
}

fn csv_error(e: csv::Error) -> ctqw::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => ctqw::Error::Io(io),
        other => ctqw::Error::Format(format!("{other:?}")),
    }
}

impl SnapshotSink for OutputSink {
    fn snapshot(&mut self, s: &Snapshot<'_>) -> Result<()> {
        let time = s.time.to_string();
        for (name, index, value) in s.observables.rows() {
            self.csv
                .write_record([time.as_str(), name, &index.to_string(), &value.to_string()])
                .map_err(csv_error)?;
        }
        if self.density_snapshots {
            let name = format!("rho_{:06}.bin", s.step);
            write_density_snapshot(s.density, self.precision, &self.dir.join(&name))?;
            self.outputs.push(name);
        }
        Ok(())
    }

    fn norm_events(&mut self, events: &[NormEvent]) -> Result<()> {
        for e in events {
            if self.logged_events < LOGGED_EVENT_LIMIT {
                writeln!(
                    self.log,
                    "norm event: realization {} step {} deviation {:.3e}{}",
                    e.realization,
                    e.step,
                    e.deviation,
                    if e.corrected { " (renormalized)" } else { "" }
                )?;
            }
            self.logged_events += 1;
        }
        Ok(())
    }

    fn outputs(&self) -> Vec<String> {
        self.outputs.clone()
    }
}

/// Run `loaded` and write observables.csv, profile.json and run.log (plus
/// snapshots when enabled) into `out_dir`. The log records the failure when
/// the run aborts.
pub fn simulate(loaded: &LoadedConfig, out_dir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut log = BufWriter::new(File::create(out_dir.join(LOG_FILE))?);
    writeln!(log, "# effective configuration")?;
    write!(log, "{}", describe(loaded))?;
    log.flush()?;

    let mut sink = OutputSink::create(out_dir, loaded.density_snapshots, loaded.run.precision, log)?;
    let outcome = run(&loaded.run, &mut sink);
    let mut log = sink.finish()?;
    let mut report = match outcome {
        Ok(r) => r,
        Err(e) => {
            writeln!(log, "error: {e}")?;
            log.flush()?;
            return Err(e);
        }
    };
    std::fs::write(
        out_dir.join(PROFILE_FILE),
        serde_json::to_string_pretty(&report.profile).map_err(|e| ctqw::Error::Format(e.to_string()))?,
    )?;
    report.outputs.push(PROFILE_FILE.to_string());
    report.outputs.push(LOG_FILE.to_string());
    writeln!(log, "# run report")?;
    writeln!(
        log,
        "{}",
        serde_json::to_string_pretty(&report).map_err(|e| ctqw::Error::Format(e.to_string()))?
    )?;
    log.flush()?;
    Ok(report)
}

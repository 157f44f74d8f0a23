use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use loopforge::io::write_csv_row;
use loopforge::Result;
use serde::Serialize;
use serde_json::Value;

pub struct Csv {
    w: BufWriter<File>,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = BufWriter::new(File::create(path)?);
        write_csv_row(&mut w, header)?;
        Ok(Csv { w })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        write_csv_row(&mut self.w, fields)
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

/// Shorthand for building CSV rows from displayable values.
#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

pub fn site_string(x: &[i32]) -> String {
    x.iter().map(i32::to_string).collect::<Vec<_>>().join(" ")
}

pub fn unix_millis() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub flags: Value,
    pub seed: u64,
    pub threads: usize,
    pub build_id: &'static str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

impl Manifest {
    pub fn write(&self, out: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(manifest_path(out))?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

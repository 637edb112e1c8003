use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::args::Format;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .context("report path has no file name")?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f =
            fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn to_csv<R: Serialize>(rows: &[R]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub struct Written {
    pub json: String,
    pub csv: String,
    pub paths: [PathBuf; 2],
}

/// Writes `<dir>/<stem>.json` and its flat CSV mirror.
pub fn write_report<T: Serialize, R: Serialize>(
    dir: &Path,
    stem: &str,
    report: &T,
    rows: &[R],
) -> Result<Written> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    let csv = to_csv(rows)?;
    let json_path = dir.join(format!("{stem}.json"));
    let csv_path = dir.join(format!("{stem}.csv"));
    write_atomic(&json_path, json.as_bytes())?;
    write_atomic(&csv_path, csv.as_bytes())?;
    Ok(Written {
        json,
        csv,
        paths: [json_path, csv_path],
    })
}

pub fn print(written: &Written, format: Format) {
    match format {
        Format::Json => print!("{}", written.json),
        Format::Csv => print!("{}", written.csv),
    }
    eprintln!(
        "wrote {} and {}",
        written.paths[0].display(),
        written.paths[1].display()
    );
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: Option<f64>,
    }

    #[test]
    fn csv_mirror_has_header() {
        let s = to_csv(&[Row { a: 1, b: None }, Row { a: 2, b: Some(0.5) }]).unwrap();
        assert_eq!(s, "a,b\n1,\n2,0.5\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}

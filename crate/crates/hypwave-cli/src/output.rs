use crate::catalog::Entry;
use crate::config::{CliError, Result};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::U(v as u64)
    }
}

impl Cell {
    /// 17 significant digits for floats.
    fn render(&self) -> String {
        match self {
            Cell::F(v) => format!("{v:.16e}"),
            Cell::U(v) => v.to_string(),
        }
    }
}

pub type Row = Vec<Cell>;

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes CSV tables as they are produced and removes them again unless committed.
pub struct Sink {
    dir: PathBuf,
    entry: &'static Entry,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl Sink {
    pub fn new(dir: &Path, entry: &'static Entry) -> Result<Self> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), entry, created_dir, files: Vec::new(), committed: false })
    }

    pub fn table(&mut self, name: &str, rows: &[Row]) -> Result<()> {
        let table = self.entry.table(name);
        let path = self.dir.join(format!("{}_{}.csv", self.entry.name, table.name));
        self.files.push(path.clone());
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(table.columns).map_err(|e| io(&path, e))?;
        for r in rows {
            assert_eq!(r.len(), table.columns.len(), "row width for {}", table.name);
            w.write_record(r.iter().map(Cell::render)).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))
    }

    pub fn file_names(&self) -> Vec<String> {
        self.files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
    }

    pub fn meta(&mut self, value: &serde_json::Value) -> Result<()> {
        let path = self.dir.join(format!("{}.meta.json", self.entry.name));
        self.files.push(path.clone());
        let text = serde_json::to_string_pretty(value).map_err(|e| io(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Sink {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fixed_width_float_format() {
        assert_eq!(Cell::F(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::F(-2.5).render(), "-2.5000000000000000e0");
        assert_eq!(Cell::U(7).render(), "7");
    }

    proptest! {
        #[test]
        fn float_cells_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let s = Cell::F(v).render();
            prop_assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits());
            let digits = s.split('e').next().unwrap().chars().filter(char::is_ascii_digit).count();
            prop_assert_eq!(digits, 17);
        }
    }
}

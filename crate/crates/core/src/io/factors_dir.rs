//! Factor directories: `A1.dtensor`, `A2.dtensor`, `A3.dtensor` and a
//! `ranks` text file holding the comma-separated `L_r`.

use std::fs;
use std::path::Path;

use crate::error::{MidasError, Result};
use crate::io::tensor_file::{read_matrix, write_matrix};
use crate::model::{LL1Factors, RankVector};
use crate::tensor::Mode;

pub fn factor_file_name(mode: Mode) -> String {
    format!("A{}.dtensor", mode.number())
}

pub fn write_factors(dir: impl AsRef<Path>, factors: &LL1Factors) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| MidasError::io(dir, e))?;
    for mode in Mode::ALL {
        write_matrix(dir.join(factor_file_name(mode)), factors.factor(mode))?;
    }
    let ranks = factors
        .ranks()
        .ranks()
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join(",");
    let path = dir.join("ranks");
    fs::write(&path, ranks + "\n").map_err(|e| MidasError::io(&path, e))
}

pub fn read_factors(dir: impl AsRef<Path>) -> Result<LL1Factors> {
    let dir = dir.as_ref();
    let path = dir.join("ranks");
    let text = fs::read_to_string(&path).map_err(|e| MidasError::io(&path, e))?;
    let ranks = parse_usize_list(text.trim()).map_err(|message| MidasError::Parse {
        path: path.clone(),
        line: 1,
        message,
    })?;
    let ranks = RankVector::new(ranks)?;
    let [a1, a2, a3] = Mode::ALL.map(|m| read_matrix(dir.join(factor_file_name(m))));
    LL1Factors::new(a1?, a2?, a3?, ranks)
}

pub(crate) fn parse_usize_list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| format!("{v:?} is not a nonnegative integer"))
        })
        .collect()
}

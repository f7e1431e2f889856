//! On-disk formats: Q tables, policies, sign series, custom kernels and
//! reports. Tables are CSV; Q tables and series carry a JSON sidecar with
//! their metadata.

use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use robustq::env::ReturnSeries;
use robustq::eval::PolicyTable;
use robustq::{
    AmbiguitySet, Categorical, FiniteActionSpace, FiniteStateSpace, Label, QTable, RewardTable,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const QTABLE_SCHEMA_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        ErrorKind::NotFound => CliError::user(format!("{}: file not found", path.display())),
        _ => CliError::io(path, e),
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    write_text(path, &text)
}

/// Sidecar path: `q.csv` -> `q.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Label components joined by `;`, e.g. `-1;1;1`.
pub fn format_label(label: &[i64]) -> String {
    label.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

pub fn parse_label(text: &str) -> CliResult<Label> {
    text.trim()
        .split(';')
        .map(|c| {
            c.trim()
                .parse()
                .map_err(|_| CliError::user(format!("bad label `{text}`")))
        })
        .collect()
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

/// Row-numbered CSV records; row 1 is the header, so data starts at row 2.
fn records(text: &str, path: &Path) -> CliResult<Vec<(usize, csv::StringRecord)>> {
    csv_reader(text)
        .records()
        .enumerate()
        .map(|(i, r)| {
            r.map(|rec| (i + 2, rec))
                .map_err(|e| CliError::user(format!("{}: row {}: {e}", path.display(), i + 2)))
        })
        .collect()
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, col: usize, row: usize, path: &Path) -> CliResult<T> {
    let raw = rec.get(col).ok_or_else(|| {
        CliError::user(format!("{}: row {row}: missing column {}", path.display(), col + 1))
    })?;
    raw.parse().map_err(|_| {
        CliError::user(format!(
            "{}: row {row}: cannot parse `{raw}` in column {}",
            path.display(),
            col + 1
        ))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTableMeta {
    pub schema_version: u32,
    pub n_states: usize,
    pub n_actions: usize,
    pub state_labels: Vec<Label>,
    pub action_labels: Vec<Label>,
    pub layout: String,
}

/// A Q table together with the labels of its rows and columns.
#[derive(Debug, Clone, PartialEq)]
pub struct QTableFile {
    pub states: FiniteStateSpace,
    pub actions: FiniteActionSpace,
    pub q: QTable,
}

impl QTableFile {
    /// Writes `path` (CSV) and its JSON sidecar.
    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut csv = String::from("state");
        for a in self.actions.labels() {
            csv.push_str(&format!(",a={}", format_label(a)));
        }
        csv.push('\n');
        for x in 0..self.q.n_states() {
            csv.push_str(&format_label(self.states.label(x)));
            for v in self.q.row(x) {
                csv.push_str(&format!(",{v}"));
            }
            csv.push('\n');
        }
        write_text(path, &csv)?;
        let meta = QTableMeta {
            schema_version: QTABLE_SCHEMA_VERSION,
            n_states: self.q.n_states(),
            n_actions: self.q.n_actions(),
            state_labels: self.states.labels().to_vec(),
            action_labels: self.actions.labels().to_vec(),
            layout: "row-major".into(),
        };
        write_json(&sidecar(path), &meta)
    }

    pub fn read(path: &Path) -> CliResult<Self> {
        let meta_path = sidecar(path);
        let meta: QTableMeta = serde_json::from_str(&read_text(&meta_path)?)
            .map_err(|e| CliError::user(format!("{}: {e}", meta_path.display())))?;
        if meta.schema_version != QTABLE_SCHEMA_VERSION {
            return Err(CliError::user(format!(
                "{}: unsupported schema version {}",
                meta_path.display(),
                meta.schema_version
            )));
        }
        let states = FiniteStateSpace::new(meta.state_labels)?;
        let actions = FiniteActionSpace::new(meta.action_labels)?;
        if states.len() != meta.n_states || actions.len() != meta.n_actions {
            return Err(CliError::user(format!(
                "{}: label counts disagree with dimensions",
                meta_path.display()
            )));
        }
        let text = read_text(path)?;
        let rows = records(&text, path)?;
        if rows.len() != states.len() {
            return Err(CliError::user(format!(
                "{}: expected {} rows, found {}",
                path.display(),
                states.len(),
                rows.len()
            )));
        }
        let mut values = Vec::with_capacity(states.len() * actions.len());
        for (x, (row, rec)) in rows.iter().enumerate() {
            if rec.len() != actions.len() + 1 {
                return Err(CliError::user(format!(
                    "{}: row {row}: expected {} columns",
                    path.display(),
                    actions.len() + 1
                )));
            }
            if parse_label(&rec[0])? != *states.label(x) {
                return Err(CliError::user(format!(
                    "{}: row {row}: state label out of order",
                    path.display()
                )));
            }
            for c in 1..=actions.len() {
                values.push(field::<f64>(rec, c, *row, path)?);
            }
        }
        let q = QTable::from_vec(states.len(), actions.len(), values)?;
        Ok(Self { states, actions, q })
    }
}

/// Writes `state,action_index,action` rows.
pub fn write_policy(path: &Path, states: &FiniteStateSpace, actions: &FiniteActionSpace, policy: &[usize]) -> CliResult<()> {
    let mut csv = String::from("state,action_index,action\n");
    for (x, &a) in policy.iter().enumerate() {
        csv.push_str(&format!(
            "{},{a},{}\n",
            format_label(states.label(x)),
            format_label(actions.label(a))
        ));
    }
    write_text(path, &csv)
}

/// Reads a policy file; rows must be in state order.
pub fn read_policy(path: &Path) -> CliResult<PolicyTable> {
    let text = read_text(path)?;
    let actions = records(&text, path)?
        .iter()
        .map(|(row, rec)| field::<usize>(rec, 1, *row, path))
        .collect::<CliResult<Vec<_>>>()?;
    PolicyTable::new(actions, 3).map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub instrument: String,
    pub start: Option<String>,
    pub end: Option<String>,
    pub count: usize,
    pub zero_returns: usize,
}

/// Writes `date,sign,cumulative` rows plus a JSON sidecar.
pub fn write_series(path: &Path, series: &ReturnSeries, zero_returns: usize) -> CliResult<()> {
    let mut csv = String::from("date,sign,cumulative\n");
    let dates = series.dates();
    for (i, (s, c)) in series.signs().iter().zip(series.cumulative()).enumerate() {
        let date = dates.get(i).map(String::as_str).unwrap_or("");
        csv.push_str(&format!("{date},{s},{c}\n"));
    }
    write_text(path, &csv)?;
    let range = series.date_range();
    write_json(
        &sidecar(path),
        &SeriesMeta {
            instrument: series.instrument.clone(),
            start: range.map(|r| r.0.to_string()),
            end: range.map(|r| r.1.to_string()),
            count: series.len(),
            zero_returns,
        },
    )
}

/// Reads a `date,sign[,...]` series; the sidecar is optional.
pub fn read_series(path: &Path) -> CliResult<ReturnSeries> {
    let text = read_text(path)?;
    let mut signs = Vec::new();
    let mut dates = Vec::new();
    for (row, rec) in records(&text, path)? {
        dates.push(rec.get(0).unwrap_or("").to_string());
        signs.push(field::<i64>(&rec, 1, row, path)?);
    }
    if dates.iter().all(String::is_empty) {
        dates.clear();
    }
    let instrument = match read_text(&sidecar(path)) {
        Ok(meta) => serde_json::from_str::<SeriesMeta>(&meta)
            .map(|m| m.instrument)
            .unwrap_or_default(),
        Err(_) => String::new(),
    };
    ReturnSeries::with_dates(signs, dates, instrument)
        .map_err(|e| CliError::user(format!("{}: {e}", path.display())))
}

/// Reads `date,price` rows (header required) into dates and prices.
pub fn read_prices(path: &Path) -> CliResult<(Vec<String>, Vec<f64>)> {
    let text = read_text(path)?;
    let mut dates = Vec::new();
    let mut prices = Vec::new();
    for (row, rec) in records(&text, path)? {
        if rec.len() < 2 {
            return Err(CliError::user(format!(
                "{}: row {row}: expected date and price columns",
                path.display()
            )));
        }
        let price: f64 = field(&rec, 1, row, path)?;
        if !(price > 0.0 && price.is_finite()) {
            return Err(CliError::user(format!(
                "{}: row {row}: price {price} is not positive",
                path.display()
            )));
        }
        dates.push(rec[0].to_string());
        prices.push(price);
    }
    if prices.len() < 2 {
        return Err(CliError::user(format!(
            "{}: need at least 2 data rows, found {}",
            path.display(),
            prices.len()
        )));
    }
    Ok((dates, prices))
}

/// Reads `x,a,k,next,prob` rows into an ambiguity set; missing entries are 0.
pub fn read_kernels(path: &Path, n_states: usize, n_actions: usize, n_kernels: usize) -> CliResult<AmbiguitySet> {
    let text = read_text(path)?;
    let mut probs = vec![0.0; n_states * n_actions * n_kernels * n_states];
    for (row, rec) in records(&text, path)? {
        let x: usize = field(&rec, 0, row, path)?;
        let a: usize = field(&rec, 1, row, path)?;
        let k: usize = field(&rec, 2, row, path)?;
        let y: usize = field(&rec, 3, row, path)?;
        let p: f64 = field(&rec, 4, row, path)?;
        if x >= n_states || y >= n_states || a >= n_actions || k >= n_kernels {
            return Err(CliError::user(format!(
                "{}: row {row}: index out of range",
                path.display()
            )));
        }
        probs[((x * n_actions + a) * n_kernels + k) * n_states + y] = p;
    }
    let mut built = Vec::with_capacity(n_states * n_actions * n_kernels);
    for (i, chunk) in probs.chunks(n_states).enumerate() {
        let (pair, k) = (i / n_kernels, i % n_kernels);
        let dist = Categorical::new(chunk.to_vec()).map_err(|e| {
            CliError::user(format!(
                "{}: kernel (x={}, a={}, k={k}): {e}",
                path.display(),
                pair / n_actions,
                pair % n_actions
            ))
        })?;
        built.push(Arc::new(dist));
    }
    Ok(AmbiguitySet::from_fn(n_states, n_actions, |x, a| {
        let start = (x * n_actions + a) * n_kernels;
        built[start..start + n_kernels].to_vec()
    })?)
}

/// Reads `x,a,next,reward` rows; missing entries are 0.
pub fn read_rewards(path: &Path, n_states: usize, n_actions: usize) -> CliResult<RewardTable> {
    let text = read_text(path)?;
    let mut values = vec![0.0; n_states * n_actions * n_states];
    for (row, rec) in records(&text, path)? {
        let x: usize = field(&rec, 0, row, path)?;
        let a: usize = field(&rec, 1, row, path)?;
        let y: usize = field(&rec, 2, row, path)?;
        let r: f64 = field(&rec, 3, row, path)?;
        if x >= n_states || y >= n_states || a >= n_actions {
            return Err(CliError::user(format!(
                "{}: row {row}: index out of range",
                path.display()
            )));
        }
        values[(x * n_actions + a) * n_states + y] = r;
    }
    Ok(RewardTable::from_fn(n_states, n_actions, |x, a, y| {
        values[(x * n_actions + a) * n_states + y]
    })?)
}

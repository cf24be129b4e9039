//! Daily multivariate series, [0, 1] scaling and lag-window samples.
//!
//! Input files are comma separated with a header row:
//! `date,temp,precip,streamflow,gw_<well>...[,week,month]`, ISO dates, one
//! row per consecutive day, no missing values. Extra numeric columns are
//! accepted as additional exogenous drivers. When `week`/`month` are absent
//! they are derived from the dates as `iso_week / 53` and `month / 12`.

use std::path::Path;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GROUNDWATER_PREFIX: &str = "gw_";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Temperature,
    Precipitation,
    /// Log-transformed (`ln(1 + x)`) before min-max scaling.
    Streamflow,
    /// Scaled with a fixed minimum of 0 (mean sea level).
    Groundwater,
    /// Already in [0, 1]; passed through unscaled.
    Calendar,
    Exogenous,
}

impl VariableKind {
    fn from_header(name: &str) -> Self {
        match name {
            "temp" | "temperature" => Self::Temperature,
            "precip" | "precipitation" => Self::Precipitation,
            "streamflow" => Self::Streamflow,
            "week" | "month" => Self::Calendar,
            n if n.starts_with(GROUNDWATER_PREFIX) => Self::Groundwater,
            _ => Self::Exogenous,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: VariableKind,
    pub values: Vec<f64>,
}

impl Column {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let name = name.into();
        Self {
            kind: VariableKind::from_header(&name),
            name,
            values,
        }
    }
}

/// Gap-free daily observations. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    dates: Vec<NaiveDate>,
    columns: Vec<Column>,
}

pub fn week_feature(date: NaiveDate) -> f64 {
    f64::from(date.iso_week().week()) / 53.0
}

pub fn month_feature(date: NaiveDate) -> f64 {
    f64::from(date.month()) / 12.0
}

impl DailySeries {
    /// Validates and assembles a series, appending calendar columns when
    /// they are missing.
    pub fn new(dates: Vec<NaiveDate>, mut columns: Vec<Column>) -> Result<Self> {
        if dates.is_empty() {
            return Err(Error::Series("series is empty".into()));
        }
        for w in dates.windows(2) {
            if w[0].succ_opt() != Some(w[1]) {
                let missing = w[0].succ_opt().map_or_else(|| w[0].to_string(), |d| d.to_string());
                return Err(Error::Series(format!(
                    "dates are not consecutive: gap after {} (expected {missing}, found {})",
                    w[0], w[1]
                )));
            }
        }
        for c in &columns {
            if c.values.len() != dates.len() {
                return Err(Error::Series(format!(
                    "column `{}` has {} values for {} dates",
                    c.name,
                    c.values.len(),
                    dates.len()
                )));
            }
            if let Some(i) = c.values.iter().position(|v| !v.is_finite()) {
                return Err(Error::Series(format!(
                    "column `{}` has a missing or non-finite value on {}",
                    c.name, dates[i]
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(c) = columns.iter().find(|c| !seen.insert(c.name.as_str())) {
            return Err(Error::Series(format!("duplicate column `{}`", c.name)));
        }
        if !columns.iter().any(|c| c.kind == VariableKind::Groundwater) {
            return Err(Error::Series(format!(
                "no groundwater column (expected a `{GROUNDWATER_PREFIX}<well>` header)"
            )));
        }
        if !columns.iter().any(|c| c.name == "week") {
            columns.push(Column::new("week", dates.iter().map(|&d| week_feature(d)).collect()));
        }
        if !columns.iter().any(|c| c.name == "month") {
            columns.push(Column::new("month", dates.iter().map(|&d| month_feature(d)).collect()));
        }
        Ok(Self { dates, columns })
    }

    /// Reads a series from a delimited text file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| parse_err(1, e.to_string()))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .iter()
            .map(str::to_owned)
            .collect();
        if headers.first().map(String::as_str) != Some("date") {
            return Err(parse_err(1, "first column must be `date`".into()));
        }
        let mut dates = Vec::new();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); headers.len() - 1];
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|e| parse_err(line, format!("bad date `{}`: {e}", &record[0])))?;
            if let Some(&prev) = dates.last() {
                if NaiveDate::succ_opt(&prev) != Some(date) {
                    return Err(parse_err(
                        line,
                        format!("gap in dates: {date} follows {prev} (missing {})", prev.succ_opt().unwrap_or(prev)),
                    ));
                }
            }
            dates.push(date);
            for (j, col) in values.iter_mut().enumerate() {
                let field = &record[j + 1];
                let v: f64 = field.parse().map_err(|_| {
                    parse_err(line, format!("missing or unparseable value `{field}` in column `{}`", headers[j + 1]))
                })?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("missing value in column `{}`", headers[j + 1])));
                }
                col.push(v);
            }
        }
        let columns = headers[1..]
            .iter()
            .zip(values)
            .map(|(h, v)| Column::new(h.clone(), v))
            .collect();
        Self::new(dates, columns)
    }

    /// Writes the series, calendar columns included, in the format `load`
    /// accepts.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let mut header = vec!["date".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header).map_err(io)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut row = vec![d.to_string()];
            row.extend(self.columns.iter().map(|c| format!("{}", c.values[i])));
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    /// Number of variables per day, `V`.
    pub fn variable_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.dates[0]).num_days();
        (0..self.len() as i64).contains(&offset).then_some(offset as usize)
    }

    /// Well names (groundwater headers without the prefix), in column order.
    pub fn wells(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| c.kind == VariableKind::Groundwater)
            .map(|c| c.name[GROUNDWATER_PREFIX.len()..].to_string())
            .collect()
    }

    /// Column indices of the named wells; all wells when `wells` is empty.
    pub fn well_columns(&self, wells: &[String]) -> Result<Vec<usize>> {
        if wells.is_empty() {
            return Ok((0..self.columns.len())
                .filter(|&i| self.columns[i].kind == VariableKind::Groundwater)
                .collect());
        }
        wells
            .iter()
            .map(|w| {
                self.column_index(&format!("{GROUNDWATER_PREFIX}{w}"))
                    .ok_or_else(|| Error::Series(format!("unknown well `{w}`")))
            })
            .collect()
    }

    /// First `len` days.
    pub fn head(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.len() {
            return Err(Error::Series(format!("cannot take {len} of {} days", self.len())));
        }
        Ok(Self {
            dates: self.dates[..len].to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    values: c.values[..len].to_vec(),
                    ..c.clone()
                })
                .collect(),
        })
    }
}

/// Per-column affine map to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaling {
    pub name: String,
    pub kind: VariableKind,
    /// Bounds in transformed units (after `ln(1 + x)` for streamflow).
    pub min: f64,
    pub max: f64,
    pub log: bool,
}

impl ColumnScaling {
    pub fn forward(&self, x: f64) -> f64 {
        let t = if self.log { x.ln_1p() } else { x };
        (t - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let t = y * (self.max - self.min) + self.min;
        if self.log { t.exp_m1() } else { t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpec {
    pub columns: Vec<ColumnScaling>,
}

impl ScalingSpec {
    /// Fits bounds over the whole series.
    ///
    /// Groundwater uses `[0, observed max]`; streamflow is scaled in
    /// `ln(1 + x)` space; calendar features are left as they are.
    pub fn fit(series: &DailySeries) -> Result<Self> {
        let columns = series
            .columns()
            .iter()
            .map(|c| {
                let (lo, hi) = c
                    .values
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                let (min, max, log) = match c.kind {
                    VariableKind::Calendar => (0.0, 1.0, false),
                    VariableKind::Groundwater => (0.0, hi, false),
                    VariableKind::Streamflow => {
                        if lo <= -1.0 {
                            return Err(Error::Series(format!(
                                "column `{}` has values <= -1, cannot log-transform",
                                c.name
                            )));
                        }
                        (lo.ln_1p(), hi.ln_1p(), true)
                    }
                    _ => (lo, hi, false),
                };
                if !(max > min) {
                    return Err(Error::Series(format!(
                        "column `{}` is constant (min = max = {max}); cannot scale",
                        c.name
                    )));
                }
                Ok(ColumnScaling {
                    name: c.name.clone(),
                    kind: c.kind,
                    min,
                    max,
                    log,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { columns })
    }

    pub fn column(&self, name: &str) -> Option<&ColumnScaling> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Scaled values, one row of `V` entries per day.
    pub fn transform(&self, series: &DailySeries) -> Result<Vec<f64>> {
        if series.variable_count() != self.columns.len()
            || series.columns().iter().zip(&self.columns).any(|(c, s)| c.name != s.name)
        {
            return Err(Error::Series("scaling was fitted on different columns".into()));
        }
        let v = self.columns.len();
        let mut out = vec![0.0; series.len() * v];
        for (j, (c, s)) in series.columns().iter().zip(&self.columns).enumerate() {
            for (t, &x) in c.values.iter().enumerate() {
                out[t * v + j] = s.forward(x);
            }
        }
        Ok(out)
    }

    /// Converts a normalized level of column `col` back to level units.
    pub fn invert_groundwater(&self, col: usize, normalized: f64) -> f64 {
        self.columns[col].inverse(normalized)
    }

    /// Level range `max − min` of column `col`.
    pub fn range(&self, col: usize) -> f64 {
        self.columns[col].max - self.columns[col].min
    }
}

/// Converts a normalized mean squared error to a root mean squared error in
/// level units.
pub fn rmse_in_levels(mse: f64, range: f64) -> f64 {
    mse.sqrt() * range
}

/// Borrowed view of supervised rows (row-major).
#[derive(Debug, Clone, Copy)]
pub struct Samples<'a> {
    pub inputs: &'a [f64],
    pub targets: &'a [f64],
    pub input_width: usize,
    pub output_width: usize,
}

impl<'a> Samples<'a> {
    pub fn new(inputs: &'a [f64], targets: &'a [f64], input_width: usize, output_width: usize) -> Self {
        assert_eq!(inputs.len() % input_width.max(1), 0);
        assert_eq!(inputs.len() / input_width.max(1), targets.len() / output_width.max(1));
        Self {
            inputs,
            targets,
            input_width,
            output_width,
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len() / self.output_width
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn input(&self, i: usize) -> &'a [f64] {
        &self.inputs[i * self.input_width..(i + 1) * self.input_width]
    }

    pub fn target(&self, i: usize) -> &'a [f64] {
        &self.targets[i * self.output_width..(i + 1) * self.output_width]
    }
}

/// Lag windows over a scaled series.
///
/// Window `i` spans days `i ..= i + G` (all `V` variables of each day,
/// oldest day first), so a series of `L` days has `L − G` windows. The
/// target of window `i` is the groundwater level of day `i + G + 1`; the
/// final window's target lies beyond the series, so there are `L − G − 1`
/// labeled samples. The first `T` labeled samples form the training split
/// for every lag; the remaining ones form the test split.
#[derive(Debug, Clone, PartialEq)]
pub struct LagSampleSet {
    lag: usize,
    variables: usize,
    train_count: usize,
    target_columns: Vec<usize>,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

/// Builds the lag windows; see [`LagSampleSet`].
pub fn build_lag_samples(
    series: &DailySeries,
    scaling: &ScalingSpec,
    lag: usize,
    train_count: usize,
    wells: &[String],
) -> Result<LagSampleSet> {
    let target_columns = series.well_columns(wells)?;
    let scaled = scaling.transform(series)?;
    LagSampleSet::from_scaled(&scaled, series.variable_count(), lag, train_count, target_columns)
}

impl LagSampleSet {
    pub fn from_scaled(
        scaled: &[f64],
        variables: usize,
        lag: usize,
        train_count: usize,
        target_columns: Vec<usize>,
    ) -> Result<Self> {
        let days = scaled.len() / variables;
        if lag == 0 {
            return Err(Error::Series("lag must be at least 1".into()));
        }
        if train_count == 0 {
            return Err(Error::Series("training count must be at least 1".into()));
        }
        if days < lag + train_count + 2 {
            return Err(Error::Series(format!(
                "series of {days} days is too short for lag {lag} and {train_count} training samples \
                 (need at least {})",
                lag + train_count + 2
            )));
        }
        let width = (lag + 1) * variables;
        let windows = days - lag;
        let inputs: Vec<f64> = (0..windows)
            .flat_map(|i| scaled[i * variables..i * variables + width].iter().copied())
            .collect();
        let targets: Vec<f64> = (0..windows - 1)
            .flat_map(|i| {
                let day = i + lag + 1;
                target_columns.iter().map(move |&c| scaled[day * variables + c])
            })
            .collect();
        Ok(Self {
            lag,
            variables,
            train_count,
            target_columns,
            inputs,
            targets,
        })
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// `(G + 1)·V`
    pub fn input_width(&self) -> usize {
        (self.lag + 1) * self.variables
    }

    pub fn output_width(&self) -> usize {
        self.target_columns.len()
    }

    pub fn target_columns(&self) -> &[usize] {
        &self.target_columns
    }

    /// All input windows, including the final unlabeled one.
    pub fn window_count(&self) -> usize {
        self.inputs.len() / self.input_width()
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let w = self.input_width();
        &self.inputs[i * w..(i + 1) * w]
    }

    pub fn labeled_count(&self) -> usize {
        self.targets.len() / self.output_width()
    }

    pub fn train_count(&self) -> usize {
        self.train_count
    }

    pub fn test_count(&self) -> usize {
        self.labeled_count() - self.train_count
    }

    fn rows(&self, from: usize, to: usize) -> Samples<'_> {
        let (w, o) = (self.input_width(), self.output_width());
        Samples::new(&self.inputs[from * w..to * w], &self.targets[from * o..to * o], w, o)
    }

    pub fn train(&self) -> Samples<'_> {
        self.rows(0, self.train_count)
    }

    pub fn test(&self) -> Samples<'_> {
        self.rows(self.train_count, self.labeled_count())
    }

    /// Every labeled sample.
    pub fn labeled(&self) -> Samples<'_> {
        self.rows(0, self.labeled_count())
    }

    /// Day index (0-based, in the series) of the target of labeled sample `i`.
    pub fn target_day(&self, i: usize) -> usize {
        i + self.lag + 1
    }
}

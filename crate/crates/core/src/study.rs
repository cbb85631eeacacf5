//! Convergence studies: sweeps over polynomial order, mesh level, time step
//! and step count, with observed rates and CSV output.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::MAX_ORDER;
use crate::mesh::MAX_LEVEL;
use crate::{heat, stokes};

/// Largest admissible `ndofs * fields` per solve.
pub const MAX_UNKNOWNS: usize = 2_000_000;

/// Residuals below this are round-off and excluded from rates.
pub const FLOOR: f64 = 1e-13;

pub const CSV_HEADER: &str = "problem,order,level,tau,steps,abs_residual,observed_rate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Problem {
    Heat,
    Stokes,
}

impl Problem {
    pub fn n_fields(self) -> usize {
        match self {
            Problem::Heat => heat::N_FIELDS,
            Problem::Stokes => stokes::N_FIELDS,
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Problem::Heat => "heat",
            Problem::Stokes => "stokes",
        })
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "heat" => Ok(Problem::Heat),
            "stokes" => Ok(Problem::Stokes),
            other => Err(Error::Config(format!("unknown problem '{other}'"))),
        }
    }
}

/// Initial velocity / temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialData {
    /// The standard smooth data with a known exact solution.
    #[default]
    Standard,
    Zero,
}

impl FromStr for InitialData {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper" | "standard" => Ok(InitialData::Standard),
            "zero" => Ok(InitialData::Zero),
            other => Err(Error::Config(format!("unknown initial data '{other}'"))),
        }
    }
}

/// First level whose rate counts toward the asymptotic order.
pub fn default_rate_from_level(order: usize) -> u32 {
    match order {
        1 => 4,
        2 => 2,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: Problem,
    pub orders: Vec<usize>,
    pub levels: Vec<u32>,
    pub taus: Vec<f64>,
    pub steps: Vec<usize>,
    pub output_path: Option<PathBuf>,
    pub initial: InitialData,
    /// Overrides [`default_rate_from_level`] for every order.
    pub rate_from_level: Option<u32>,
}

impl StudyConfig {
    pub fn new(
        problem: Problem,
        orders: Vec<usize>,
        levels: Vec<u32>,
        tau: f64,
        steps: usize,
    ) -> Self {
        StudyConfig {
            problem,
            orders,
            levels,
            taus: vec![tau],
            steps: vec![steps],
            output_path: None,
            initial: InitialData::Standard,
            rate_from_level: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty()
            || self.levels.is_empty()
            || self.taus.is_empty()
            || self.steps.is_empty()
        {
            return Err(Error::Config(
                "orders, levels, tau and steps must be non-empty".into(),
            ));
        }
        if let Some(&p) = self.orders.iter().find(|&&p| p == 0 || p > MAX_ORDER) {
            return Err(Error::Config(format!("order {p} outside 1..={MAX_ORDER}")));
        }
        if let Some(&l) = self.levels.iter().find(|&&l| l > MAX_LEVEL) {
            return Err(Error::Config(format!("level {l} exceeds {MAX_LEVEL}")));
        }
        if let Some(&t) = self.taus.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!(
                "time step must be positive, got {t}"
            )));
        }
        if self.steps.contains(&0) {
            return Err(Error::Config("step counts must be at least 1".into()));
        }
        for &p in &self.orders {
            for &l in &self.levels {
                let side = p * (1usize << l) + 1;
                let unknowns = side * side * self.problem.n_fields();
                if unknowns > MAX_UNKNOWNS {
                    return Err(Error::Config(format!(
                        "{} p={p} level {l} needs {unknowns} unknowns, limit is {MAX_UNKNOWNS}",
                        self.problem
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn rate_from_level(&self, order: usize) -> u32 {
        self.rate_from_level
            .unwrap_or_else(|| default_rate_from_level(order))
    }

    /// Parses `key = value` lines; `#` starts a comment. Lists are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take = |key: &str| map.get(key).map(String::as_str);
        let required =
            |key: &str| take(key).ok_or_else(|| Error::Config(format!("missing key '{key}'")));

        let cfg = StudyConfig {
            problem: required("problem")?.parse()?,
            orders: parse_list(required("orders")?)?,
            levels: parse_list(required("levels")?)?,
            taus: take("tau").map_or(Ok(vec![0.005]), parse_list)?,
            steps: take("steps").map_or(Ok(vec![1]), parse_list)?,
            output_path: take("out").map(PathBuf::from),
            initial: take("u0").map_or(Ok(InitialData::Standard), str::parse)?,
            rate_from_level: take("rate_from_level").map(parse_one).transpose()?,
        };
        for key in map.keys() {
            if ![
                "problem",
                "orders",
                "levels",
                "tau",
                "steps",
                "out",
                "u0",
                "rate_from_level",
            ]
            .contains(&key.as_str())
            {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn parse_one<T: FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse '{}'", s.trim())))
}

fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>> {
    s.split(',').map(parse_one).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub problem: Problem,
    pub order: usize,
    pub level: u32,
    pub tau: f64,
    pub steps: usize,
    pub abs_residual: f64,
    pub observed_rate: Option<f64>,
}

impl ConvergenceRow {
    /// Residual at round-off level.
    pub fn is_floor(&self) -> bool {
        self.abs_residual < FLOOR
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Sorts the rows and fills in the observed rates between consecutive
    /// levels that share problem, order, time step and step count.
    pub fn from_rows(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by(|a, b| {
            (a.problem, a.order, a.level)
                .cmp(&(b.problem, b.order, b.level))
                .then(a.tau.total_cmp(&b.tau))
                .then(a.steps.cmp(&b.steps))
        });
        let mut last: BTreeMap<(Problem, usize, u64, usize), (u32, f64)> = BTreeMap::new();
        for row in &mut rows {
            let key = (row.problem, row.order, row.tau.to_bits(), row.steps);
            row.observed_rate = match last.get(&key) {
                Some(&(l, e)) if !row.is_floor() && e >= FLOOR => {
                    Some((e / row.abs_residual).log2() / f64::from(row.level - l))
                }
                _ => None,
            };
            last.insert(key, (row.level, row.abs_residual));
        }
        ConvergenceTable { rows }
    }

    pub fn rows(&self) -> &[ConvergenceRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rates of non-floor rows for one series, keeping levels above `from_level`.
    pub fn rates(&self, order: usize, tau: f64, steps: usize, from_level: u32) -> Vec<(u32, f64)> {
        self.rows
            .iter()
            .filter(|r| {
                r.order == order && r.tau == tau && r.steps == steps && r.level > from_level
            })
            .filter_map(|r| r.observed_rate.map(|q| (r.level, q)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let rate = r
                .observed_rate
                .map(|q| format!("{q:.16e}"))
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:.16e},{},{:.16e},{}\n",
                r.problem, r.order, r.level, r.tau, r.steps, r.abs_residual, rate
            ));
        }
        out
    }

    /// Parses CSV text as written by [`ConvergenceTable::to_csv`], keeping the stored rates.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CSV_HEADER) {
            return Err(Error::Config("missing or unexpected CSV header".into()));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 7 {
                return Err(Error::Config(format!(
                    "CSV row {}: expected 7 cells",
                    i + 1
                )));
            }
            rows.push(ConvergenceRow {
                problem: cells[0].parse()?,
                order: parse_one(cells[1])?,
                level: parse_one(cells[2])?,
                tau: parse_one(cells[3])?,
                steps: parse_one(cells[4])?,
                abs_residual: parse_one(cells[5])?,
                observed_rate: if cells[6].is_empty() {
                    None
                } else {
                    Some(parse_one(cells[6])?)
                },
            });
        }
        Ok(ConvergenceTable { rows })
    }
}

pub fn write_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    std::fs::write(path, table.to_csv()).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<ConvergenceTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ConvergenceTable::parse_csv(&text)
}

/// `log2(e_{k-1} / e_k)` divided by the level gap, for consecutive entries.
pub fn estimate_rates(values: &[(u32, f64)]) -> Result<Vec<f64>> {
    if let Some(&(l, e)) = values.iter().find(|(_, e)| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Domain(format!(
            "error at level {l} must be positive, got {e}"
        )));
    }
    values
        .windows(2)
        .map(|w| {
            let (l0, e0) = w[0];
            let (l1, e1) = w[1];
            if l1 <= l0 {
                return Err(Error::Domain("levels must be strictly increasing".into()));
            }
            Ok((e0 / e1).log2() / f64::from(l1 - l0))
        })
        .collect()
}

/// Residual magnitude after each of the first `steps` steps.
pub fn residual_history(
    problem: Problem,
    level: u32,
    order: usize,
    tau: f64,
    steps: usize,
    initial: InitialData,
) -> Result<Vec<f64>> {
    let records = match (problem, initial) {
        (Problem::Heat, InitialData::Standard) => {
            heat::run_heat(level, order, tau, steps, heat::standard_initial)?
        }
        (Problem::Heat, InitialData::Zero) => heat::run_heat(level, order, tau, steps, |_, _| 0.0)?,
        (Problem::Stokes, InitialData::Standard) => {
            stokes::run_stokes(level, order, tau, steps, stokes::standard_initial)?
        }
        (Problem::Stokes, InitialData::Zero) => {
            stokes::run_stokes(level, order, tau, steps, |_, _| [0.0; 2])?
        }
    };
    Ok(records.iter().map(|r| r.abs_residual).collect())
}

/// One row per `(order, level, tau, steps)`; each `(order, level, tau)` is
/// run once up to the largest step count.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    let max_steps = *config.steps.iter().max().expect("validated non-empty");
    let mut rows = Vec::new();
    for &order in &config.orders {
        for &level in &config.levels {
            for &tau in &config.taus {
                log::info!(
                    "{} p={order} level={level} tau={tau} steps={max_steps}",
                    config.problem
                );
                let history =
                    residual_history(config.problem, level, order, tau, max_steps, config.initial)?;
                for &steps in &config.steps {
                    rows.push(ConvergenceRow {
                        problem: config.problem,
                        order,
                        level,
                        tau,
                        steps,
                        abs_residual: history[steps - 1],
                        observed_rate: None,
                    });
                }
            }
        }
    }
    let table = ConvergenceTable::from_rows(rows);
    if let Some(path) = &config.output_path {
        write_csv(&table, path)?;
    }
    Ok(table)
}

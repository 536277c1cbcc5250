use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::AdjacencyGraph;

/// Counts, populations at risk and covariates over regions (and optionally time).
///
/// Observations are stored slice by slice: observation `t * I + i` is region
/// `i` at time `t`. A static dataset has a single slice and no time labels.
/// The design matrix always starts with an intercept column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    region_ids: Vec<String>,
    times: Option<Vec<String>>,
    y: Vec<u64>,
    n: Vec<f64>,
    x: Vec<f64>,
    covariate_names: Vec<String>,
}

impl Dataset {
    /// `covariates` holds `k` extra columns per observation, row-major, in
    /// the same observation order as `y` and `n`.
    pub fn new(
        region_ids: Vec<String>,
        times: Option<Vec<String>>,
        y: Vec<u64>,
        n: Vec<f64>,
        covariate_names: Vec<String>,
        covariates: Vec<f64>,
    ) -> Result<Self> {
        let n_regions = region_ids.len();
        if n_regions == 0 {
            return Err(Error::Shape("dataset has no regions".into()));
        }
        let n_times = times.as_ref().map_or(1, Vec::len);
        if n_times == 0 {
            return Err(Error::Shape("panel dataset has no time points".into()));
        }
        let n_obs = n_regions * n_times;
        if y.len() != n_obs || n.len() != n_obs {
            return Err(Error::Shape(format!(
                "expected {n_obs} counts and populations, got {} and {}",
                y.len(),
                n.len()
            )));
        }
        if let Some(o) = n.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!(
                "population at risk must be positive (observation {o}: {})",
                n[o]
            )));
        }
        let k = covariate_names.len();
        if covariates.len() != n_obs * k {
            return Err(Error::Shape(format!(
                "expected {} covariate values, got {}",
                n_obs * k,
                covariates.len()
            )));
        }
        if covariates.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("covariates must be finite".into()));
        }
        let p = k + 1;
        let mut x = Vec::with_capacity(n_obs * p);
        for o in 0..n_obs {
            x.push(1.0);
            x.extend_from_slice(&covariates[o * k..(o + 1) * k]);
        }
        let mut names = Vec::with_capacity(p);
        names.push("intercept".to_owned());
        names.extend(covariate_names);
        Ok(Self {
            region_ids,
            times,
            y,
            n,
            x,
            covariate_names: names,
        })
    }

    /// Intercept-only static dataset.
    pub fn intercept_only(region_ids: Vec<String>, y: Vec<u64>, n: Vec<f64>) -> Result<Self> {
        Self::new(region_ids, None, y, n, Vec::new(), Vec::new())
    }

    pub fn n_regions(&self) -> usize {
        self.region_ids.len()
    }

    pub fn n_times(&self) -> usize {
        self.times.as_ref().map_or(1, Vec::len)
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Number of design-matrix columns, intercept included.
    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn is_panel(&self) -> bool {
        self.times.is_some()
    }

    pub fn region_ids(&self) -> &[String] {
        &self.region_ids
    }

    pub fn times(&self) -> Option<&[String]> {
        self.times.as_deref()
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    #[inline]
    pub fn obs(&self, region: usize, time: usize) -> usize {
        time * self.region_ids.len() + region
    }

    pub fn y(&self) -> &[u64] {
        &self.y
    }

    pub fn n(&self) -> &[f64] {
        &self.n
    }

    #[inline]
    pub fn x_row(&self, obs: usize) -> &[f64] {
        let p = self.covariate_names.len();
        &self.x[obs * p..(obs + 1) * p]
    }

    /// Extra covariates (intercept excluded), row-major.
    fn extra_covariates(&self) -> Vec<f64> {
        (0..self.n_obs())
            .flat_map(|o| self.x_row(o)[1..].to_vec())
            .collect()
    }

    fn extra_names(&self) -> Vec<String> {
        self.covariate_names[1..].to_vec()
    }

    /// Single time slice as a static dataset.
    pub fn slice(&self, t: usize) -> Result<Dataset> {
        if t >= self.n_times() {
            return Err(Error::Shape(format!("time index {t} out of range")));
        }
        let ni = self.n_regions();
        let range = t * ni..(t + 1) * ni;
        let k = self.n_covariates() - 1;
        let cov = self.extra_covariates()[t * ni * k..(t + 1) * ni * k].to_vec();
        Dataset::new(
            self.region_ids.clone(),
            None,
            self.y[range.clone()].to_vec(),
            self.n[range].to_vec(),
            self.extra_names(),
            cov,
        )
    }

    /// The first `len` time slices as a panel.
    pub fn leading_slices(&self, len: usize) -> Result<Dataset> {
        let times = self
            .times
            .as_ref()
            .ok_or_else(|| Error::Shape("dataset is static".into()))?;
        if len == 0 || len > times.len() {
            return Err(Error::Shape(format!("cannot take {len} of {} slices", times.len())));
        }
        let end = len * self.n_regions();
        let k = self.n_covariates() - 1;
        Dataset::new(
            self.region_ids.clone(),
            Some(times[..len].to_vec()),
            self.y[..end].to_vec(),
            self.n[..end].to_vec(),
            self.extra_names(),
            self.extra_covariates()[..end * k].to_vec(),
        )
    }

    /// Rejects a design matrix without full column rank.
    pub fn check_rank(&self) -> Result<()> {
        let p = self.n_covariates();
        let m = self.n_obs();
        if m < p {
            return Err(Error::RankDeficient);
        }
        // modified Gram-Schmidt over the columns
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
        for c in 0..p {
            let mut v: Vec<f64> = (0..m).map(|o| self.x_row(o)[c]).collect();
            let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm0 == 0.0 {
                return Err(Error::RankDeficient);
            }
            for q in &basis {
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm <= 1e-10 * norm0 {
                return Err(Error::RankDeficient);
            }
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
        Ok(())
    }

    /// Raw relative risks `Y / E` per observation.
    pub fn raw_risks(&self) -> Result<Vec<f64>> {
        let e = internal_standardization(self)?;
        Ok(self
            .y
            .iter()
            .zip(&e)
            .map(|(&y, &e)| y as f64 / e)
            .collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["region".to_owned()];
        if self.is_panel() {
            header.push("year".to_owned());
        }
        header.extend(["y".to_owned(), "n".to_owned()]);
        header.extend(self.extra_names());
        w.write_record(&header)?;
        for t in 0..self.n_times() {
            for i in 0..self.n_regions() {
                let o = self.obs(i, t);
                let mut rec = vec![self.region_ids[i].clone()];
                if let Some(times) = &self.times {
                    rec.push(times[t].clone());
                }
                rec.push(self.y[o].to_string());
                rec.push(self.n[o].to_string());
                rec.extend(self.x_row(o)[1..].iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Expected counts by internal standardization, slice by slice:
/// `E_it = n_it * sum_i Y_it / sum_i n_it`.
pub fn internal_standardization(data: &Dataset) -> Result<Vec<f64>> {
    let ni = data.n_regions();
    let mut e = Vec::with_capacity(data.n_obs());
    for t in 0..data.n_times() {
        let range = t * ni..(t + 1) * ni;
        let total_y: u64 = data.y[range.clone()].iter().sum();
        if total_y == 0 {
            let label = data
                .times
                .as_ref()
                .map_or_else(|| "static".to_owned(), |ts| ts[t].clone());
            return Err(Error::ZeroCounts(label));
        }
        let total_n: f64 = data.n[range.clone()].iter().sum();
        let rate = total_y as f64 / total_n;
        e.extend(data.n[range].iter().map(|&n| n * rate));
    }
    Ok(e)
}

/// Reads a dataset CSV (`region,year?,y,n,x1..xk`) and orders regions to
/// match the adjacency graph.
pub fn load_dataset<P: AsRef<Path>>(path: P, graph: &AdjacencyGraph) -> Result<Dataset> {
    read_dataset(std::fs::File::open(path.as_ref())?, graph)
}

pub fn read_dataset<R: Read>(input: R, graph: &AdjacencyGraph) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let region_col = col("region").ok_or_else(|| Error::Parse("missing `region` column".into()))?;
    let y_col = col("y").ok_or_else(|| Error::Parse("missing `y` column".into()))?;
    let n_col = col("n").ok_or_else(|| Error::Parse("missing `n` column".into()))?;
    let year_col = col("year");
    let used = [Some(region_col), Some(y_col), Some(n_col), year_col];
    let cov_cols: Vec<usize> = (0..header.len())
        .filter(|c| !used.contains(&Some(*c)))
        .collect();
    let cov_names: Vec<String> = cov_cols.iter().map(|&c| header[c].clone()).collect();

    struct Row {
        region: usize,
        year: Option<String>,
        y: u64,
        n: f64,
        x: Vec<f64>,
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or_default();
        let region_id = field(region_col);
        let region = graph
            .region_index(region_id)
            .ok_or_else(|| Error::UnknownRegion(region_id.to_owned()))?;
        let y = field(y_col)
            .parse::<u64>()
            .map_err(|_| Error::Parse(format!("row {}: count `{}` is not a nonnegative integer", line + 1, field(y_col))))?;
        let n = parse_f64(field(n_col), line)?;
        let x = cov_cols
            .iter()
            .map(|&c| parse_f64(field(c), line))
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            region,
            year: year_col.map(|c| field(c).to_owned()),
            y,
            n,
            x,
        });
    }

    let ni = graph.n_regions();
    let times = year_col.map(|_| {
        let mut labels: Vec<String> = rows.iter().filter_map(|r| r.year.clone()).collect();
        labels.sort_by(compare_time_labels);
        labels.dedup();
        labels
    });
    let time_index: HashMap<&str, usize> = times
        .iter()
        .flatten()
        .enumerate()
        .map(|(t, s)| (s.as_str(), t))
        .collect();
    let nt = times.as_ref().map_or(1, Vec::len);
    let k = cov_names.len();
    let mut y = vec![0; ni * nt];
    let mut n = vec![0.0; ni * nt];
    let mut x = vec![0.0; ni * nt * k];
    let mut filled = vec![false; ni * nt];
    for row in rows {
        let t = row.year.as_deref().map_or(0, |s| time_index[s]);
        let o = t * ni + row.region;
        if filled[o] {
            return Err(Error::Parse(format!(
                "duplicate row for region {}{}",
                graph.region_ids()[row.region],
                row.year.map(|s| format!(" year {s}")).unwrap_or_default()
            )));
        }
        filled[o] = true;
        y[o] = row.y;
        n[o] = row.n;
        x[o * k..(o + 1) * k].copy_from_slice(&row.x);
    }
    if let Some(o) = filled.iter().position(|f| !f) {
        let (t, i) = (o / ni, o % ni);
        let when = times.as_ref().map(|ts| format!(" year {}", ts[t])).unwrap_or_default();
        return Err(Error::Parse(format!(
            "missing row for region {}{when}",
            graph.region_ids()[i]
        )));
    }
    Dataset::new(graph.region_ids().to_vec(), times, y, n, cov_names, x)
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {}: `{s}` is not a number", line + 1)))
}

/// Numeric labels sort numerically, anything else lexically.
fn compare_time_labels(a: &String, b: &String) -> std::cmp::Ordering {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x.total_cmp(&y),
        _ => a.cmp(b),
    }
}

/// Reads a `region,n` population file aligned to the graph.
pub fn load_populations<P: AsRef<Path>>(path: P, graph: &AdjacencyGraph) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut pops: BTreeMap<usize, f64> = BTreeMap::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let id = record.get(0).unwrap_or_default();
        let i = graph
            .region_index(id)
            .ok_or_else(|| Error::UnknownRegion(id.to_owned()))?;
        let n = parse_f64(record.get(1).unwrap_or_default(), line)?;
        if !(n > 0.0) {
            return Err(Error::Domain(format!("population of {id} must be positive")));
        }
        pops.insert(i, n);
    }
    (0..graph.n_regions())
        .map(|i| {
            pops.get(&i)
                .copied()
                .ok_or_else(|| Error::Parse(format!("no population for {}", graph.region_ids()[i])))
        })
        .collect()
}

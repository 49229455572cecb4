//! Categorical encoding of raw tabular data.
//!
//! Each partially identifying variable (PIV) gets one support shared by both files: codes
//! `1..=n_k` are assigned in first-appearance order scanning file A then file B, and `0`
//! stands for a missing value.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::soundex::soundex;

/// Categorical code. `0` is missing, observed values are `1..=n_k`.
pub type Code = u32;

pub const MISSING: Code = 0;

/// Default cap on the mistake probability of a stable PIV.
pub const DEFAULT_MISTAKE_BOUND: f64 = 0.10;

/// Per-variable metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct PivSpec {
    pub name: String,
    /// Number of distinct observed values across both files (`n_k`).
    pub support_size: usize,
    /// Whether the true value is identical in both files for a linked pair.
    pub stable: bool,
    /// Upper bound applied to the estimated mistake probability.
    pub mistake_bound: f64,
    pub soundex_encoded: bool,
}

impl PivSpec {
    pub fn stable(name: impl Into<String>, support_size: usize) -> Self {
        PivSpec {
            name: name.into(),
            support_size,
            stable: true,
            mistake_bound: DEFAULT_MISTAKE_BOUND,
            soundex_encoded: false,
        }
    }

    pub fn unstable(name: impl Into<String>, support_size: usize) -> Self {
        PivSpec {
            stable: false,
            ..PivSpec::stable(name, support_size)
        }
    }

    pub fn with_mistake_bound(mut self, bound: f64) -> Self {
        self.mistake_bound = bound;
        self
    }

    pub fn with_soundex(mut self, on: bool) -> Self {
        self.soundex_encoded = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.support_size == 0 {
            return Err(Error::Config(format!(
                "PIV '{}' has an empty support",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.mistake_bound) {
            return Err(Error::Config(format!(
                "PIV '{}': mistake_bound {} is not a probability",
                self.name, self.mistake_bound
            )));
        }
        Ok(())
    }
}

/// Which raw strings count as missing. Comparison is on the trimmed value, case-insensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct MissingMarkers(Vec<String>);

impl Default for MissingMarkers {
    fn default() -> Self {
        MissingMarkers(vec![String::new(), "na".to_string()])
    }
}

impl MissingMarkers {
    pub fn new<S: AsRef<str>>(markers: impl IntoIterator<Item = S>) -> Self {
        MissingMarkers(
            markers
                .into_iter()
                .map(|m| m.as_ref().trim().to_lowercase())
                .collect(),
        )
    }

    pub fn is_missing(&self, raw: &str) -> bool {
        let v = raw.trim();
        self.0.iter().any(|m| m.eq_ignore_ascii_case(v))
    }
}

/// Value a raw cell is encoded under: trimmed, and soundex-coded when the PIV asks for it.
/// `None` for missing cells.
pub fn normalize<'a>(
    raw: &'a str,
    spec: &PivSpec,
    missing: &MissingMarkers,
) -> Option<std::borrow::Cow<'a, str>> {
    if missing.is_missing(raw) {
        return None;
    }
    let v = raw.trim();
    if spec.soundex_encoded {
        Some(soundex(v).into())
    } else {
        Some(v.into())
    }
}

/// Bijection between observed raw values and codes `1..=n_k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SupportMap {
    forward: HashMap<String, Code>,
    reverse: Vec<String>,
}

impl SupportMap {
    /// Number of codes (`n_k`).
    pub fn len(&self) -> usize {
        self.reverse.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reverse.is_empty()
    }

    pub fn code(&self, value: &str) -> Option<Code> {
        self.forward.get(value).copied()
    }

    /// Raw value behind `code`; `None` for `0` and out-of-range codes.
    pub fn value(&self, code: Code) -> Option<&str> {
        if code == MISSING {
            return None;
        }
        self.reverse.get(code as usize - 1).map(String::as_str)
    }

    /// Adds `value` if unseen and returns its code.
    pub fn insert(&mut self, value: &str) -> Code {
        if let Some(&c) = self.forward.get(value) {
            return c;
        }
        self.reverse.push(value.to_string());
        let c = self.reverse.len() as Code;
        self.forward.insert(value.to_string(), c);
        c
    }

    pub fn values(&self) -> &[String] {
        &self.reverse
    }
}

/// Builds the shared support of one PIV from its raw columns in both files.
pub fn build_support<'a>(
    raw_a: impl IntoIterator<Item = &'a str>,
    raw_b: impl IntoIterator<Item = &'a str>,
    spec: &PivSpec,
    missing: &MissingMarkers,
) -> Result<SupportMap> {
    let mut map = SupportMap::default();
    for raw in raw_a.into_iter().chain(raw_b) {
        if let Some(v) = normalize(raw, spec, missing) {
            map.insert(&v);
        }
    }
    if map.is_empty() {
        return Err(Error::Config(format!(
            "PIV '{}' is missing in every record of both files",
            spec.name
        )));
    }
    Ok(map)
}

/// Raw CSV content: header plus string cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in header")))
    }

    pub fn column(&self, idx: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows
            .iter()
            .map(move |r| r.get(idx).map(String::as_str).unwrap_or(""))
    }
}

/// An encoded file: row-major code matrix plus optional registration times.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    n_records: usize,
    n_pivs: usize,
    values: Vec<Code>,
    times: Option<Vec<f64>>,
}

impl RecordTable {
    /// Builds a table from rows of codes. All rows must have the same length.
    pub fn from_rows(rows: &[Vec<Code>], times: Option<Vec<f64>>) -> Result<Self> {
        let n_pivs = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_pivs) {
            return Err(Error::Argument("ragged code rows".into()));
        }
        let values = rows.iter().flatten().copied().collect();
        Self::from_flat(rows.len(), n_pivs, values, times)
    }

    pub fn from_flat(
        n_records: usize,
        n_pivs: usize,
        values: Vec<Code>,
        times: Option<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != n_records * n_pivs {
            return Err(Error::Argument(format!(
                "{} codes do not fill a {n_records}x{n_pivs} table",
                values.len()
            )));
        }
        if let Some(t) = &times {
            if t.len() != n_records {
                return Err(Error::Argument(format!(
                    "{} registration times for {n_records} records",
                    t.len()
                )));
            }
            if t.iter().any(|x| !x.is_finite()) {
                return Err(Error::Data("non-finite registration time".into()));
            }
        }
        Ok(RecordTable {
            n_records,
            n_pivs,
            values,
            times,
        })
    }

    pub fn n_records(&self) -> usize {
        self.n_records
    }

    pub fn n_pivs(&self) -> usize {
        self.n_pivs
    }

    #[inline]
    pub fn get(&self, record: usize, piv: usize) -> Code {
        self.values[record * self.n_pivs + piv]
    }

    #[inline]
    pub fn row(&self, record: usize) -> &[Code] {
        &self.values[record * self.n_pivs..(record + 1) * self.n_pivs]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Code]> + '_ {
        self.values.chunks(self.n_pivs.max(1)).take(self.n_records)
    }

    pub fn column(&self, piv: usize) -> impl Iterator<Item = Code> + '_ {
        (0..self.n_records).map(move |i| self.get(i, piv))
    }

    pub fn set(&mut self, record: usize, piv: usize, code: Code) {
        self.values[record * self.n_pivs + piv] = code;
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    pub fn with_times(mut self, times: Option<Vec<f64>>) -> Result<Self> {
        self = Self::from_flat(self.n_records, self.n_pivs, self.values, times)?;
        Ok(self)
    }

    /// Checks every code of column `k` lies in `0..=support[k]`.
    pub fn check_codes(&self, specs: &[PivSpec]) -> Result<()> {
        if specs.len() != self.n_pivs {
            return Err(Error::Config(format!(
                "{} PIV specs for a table with {} columns",
                specs.len(),
                self.n_pivs
            )));
        }
        for (i, row) in self.rows().enumerate() {
            for (k, (&g, spec)) in row.iter().zip(specs).enumerate() {
                if g as usize > spec.support_size {
                    return Err(Error::Data(format!(
                        "record {i}, PIV {k} ('{}'): code {g} exceeds support size {}",
                        spec.name, spec.support_size
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Encodes the PIV columns of `raw` (one per spec, located by name) against their supports.
///
/// A spec whose name is not a header column but joins several columns with `+`
/// (e.g. `state+region`) is encoded on the glued value; it is missing when any part is.
pub fn encode_table(
    raw: &RawTable,
    specs: &[PivSpec],
    supports: &[SupportMap],
    time_column: Option<&str>,
    missing: &MissingMarkers,
) -> Result<RecordTable> {
    if specs.len() != supports.len() {
        return Err(Error::Argument(format!(
            "{} specs but {} supports",
            specs.len(),
            supports.len()
        )));
    }
    let columns: Vec<Vec<String>> = specs
        .iter()
        .map(|s| piv_column(raw, s, missing))
        .collect::<Result<_>>()?;

    let n = raw.rows.len();
    let mut values = Vec::with_capacity(n * specs.len());
    for i in 0..n {
        for ((spec, support), col) in specs.iter().zip(supports).zip(&columns) {
            let cell = &col[i];
            let code = match normalize(cell, spec, missing) {
                None => MISSING,
                Some(v) => support.code(&v).ok_or_else(|| {
                    Error::Data(format!(
                        "row {} (line {}), column '{}': value '{}' is not in the support",
                        i,
                        i + 2,
                        spec.name,
                        cell
                    ))
                })?,
            };
            values.push(code);
        }
    }

    let times = match time_column {
        None => None,
        Some(name) => {
            let idx = raw.column_index(name)?;
            let parsed = raw
                .column(idx)
                .enumerate()
                .map(|(i, s)| {
                    s.trim().parse::<f64>().map_err(|_| {
                        Error::Data(format!(
                            "row {} (line {}), column '{name}': bad registration time '{s}'",
                            i,
                            i + 2
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Some(parsed)
        }
    };
    RecordTable::from_flat(n, specs.len(), values, times)
}

/// Raw cells of the PIV described by `spec`: a header column, or `+`-glued columns.
pub fn piv_column(raw: &RawTable, spec: &PivSpec, missing: &MissingMarkers) -> Result<Vec<String>> {
    if let Ok(idx) = raw.column_index(&spec.name) {
        return Ok(raw.column(idx).map(str::to_string).collect());
    }
    let parts: Vec<&str> = spec.name.split('+').collect();
    if parts.len() < 2 {
        return Err(Error::Config(format!(
            "column '{}' not found in header",
            spec.name
        )));
    }
    let idx = parts
        .iter()
        .map(|p| raw.column_index(p))
        .collect::<Result<Vec<_>>>()?;
    Ok(raw
        .rows
        .iter()
        .map(|r| {
            let cells: Vec<&str> = idx
                .iter()
                .map(|&c| r.get(c).map(String::as_str).unwrap_or(""))
                .collect();
            if cells.iter().any(|c| missing.is_missing(c)) {
                String::new()
            } else {
                cells.iter().map(|c| c.trim()).collect::<Vec<_>>().join("\u{1f}")
            }
        })
        .collect())
}

/// Builds supports for every spec and encodes both files. Returns the specs with their
/// `support_size` filled in.
pub fn encode_pair(
    raw_a: &RawTable,
    raw_b: &RawTable,
    specs: &[PivSpec],
    time_column: Option<&str>,
    missing: &MissingMarkers,
) -> Result<(RecordTable, RecordTable, Vec<PivSpec>, Vec<SupportMap>)> {
    let mut resolved = Vec::with_capacity(specs.len());
    let mut supports = Vec::with_capacity(specs.len());
    for spec in specs {
        let col_a = piv_column(raw_a, spec, missing)?;
        let col_b = piv_column(raw_b, spec, missing)?;
        let map = build_support(
            col_a.iter().map(String::as_str),
            col_b.iter().map(String::as_str),
            spec,
            missing,
        )?;
        resolved.push(PivSpec {
            support_size: map.len(),
            ..spec.clone()
        });
        supports.push(map);
    }
    let a = encode_table(raw_a, &resolved, &supports, time_column, missing)?;
    let b = encode_table(raw_b, &resolved, &supports, time_column, missing)?;
    Ok((a, b, resolved, supports))
}

/// Glues columns `k1` and `k2` of several tables into one PIV with a shared support of
/// observed `(v1, v2)` pairs. The merged column takes the position of `min(k1, k2)`; the
/// other one is removed. Returns the rewritten tables and the merged support size.
pub fn merge_pivs_shared(
    tables: &[&RecordTable],
    k1: usize,
    k2: usize,
) -> Result<(Vec<RecordTable>, usize)> {
    if k1 == k2 {
        return Err(Error::Argument(format!("cannot merge PIV {k1} with itself")));
    }
    let (lo, hi) = (k1.min(k2), k1.max(k2));
    let mut pair_codes: HashMap<(Code, Code), Code> = HashMap::new();
    let mut out = Vec::with_capacity(tables.len());
    for t in tables {
        if hi >= t.n_pivs() {
            return Err(Error::Argument(format!(
                "PIV index {hi} out of range for {} columns",
                t.n_pivs()
            )));
        }
        let mut values = Vec::with_capacity(t.n_records() * (t.n_pivs() - 1));
        for row in t.rows() {
            for (k, &g) in row.iter().enumerate() {
                if k == hi {
                    continue;
                }
                if k == lo {
                    let (v1, v2) = (row[k1], row[k2]);
                    let merged = if v1 == MISSING || v2 == MISSING {
                        MISSING
                    } else {
                        let next = pair_codes.len() as Code + 1;
                        *pair_codes.entry((v1, v2)).or_insert(next)
                    };
                    values.push(merged);
                } else {
                    values.push(g);
                }
            }
        }
        out.push(RecordTable::from_flat(
            t.n_records(),
            t.n_pivs() - 1,
            values,
            t.times().map(<[f64]>::to_vec),
        )?);
    }
    Ok((out, pair_codes.len()))
}

/// Single-table form of [`merge_pivs_shared`].
pub fn merge_pivs(table: &RecordTable, k1: usize, k2: usize) -> Result<(RecordTable, usize)> {
    let (mut tables, n) = merge_pivs_shared(&[table], k1, k2)?;
    Ok((tables.remove(0), n))
}

/// Spec of a PIV produced by [`merge_pivs_shared`]: stable only if both parts are, and a
/// mistake bound covering a mistake in either part.
pub fn merged_spec(s1: &PivSpec, s2: &PivSpec, support_size: usize) -> PivSpec {
    PivSpec {
        name: format!("{}+{}", s1.name, s2.name),
        support_size,
        stable: s1.stable && s2.stable,
        mistake_bound: 1.0 - (1.0 - s1.mistake_bound) * (1.0 - s2.mistake_bound),
        soundex_encoded: false,
    }
}

/// Fraction of missing codes per PIV.
pub fn missing_rates<F: Scalar>(table: &RecordTable) -> Vec<F> {
    let n = table.n_records();
    (0..table.n_pivs())
        .map(|k| {
            if n == 0 {
                return F::zero();
            }
            let zeros = table.column(k).filter(|&g| g == MISSING).count();
            if zeros == n {
                log::warn!("PIV {k} is missing in every record; it carries no information");
            }
            F::from_count(zeros) / F::from_count(n)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    #[test]
    fn four_names_get_codes_one_to_four() {
        let spec = PivSpec::stable("name", 0);
        let m = MissingMarkers::default();
        let map = build_support(
            ["kayané", "stéphanie"],
            ["mark", "michel", "mark"],
            &spec,
            &m,
        )
        .unwrap();
        assert_eq!(map.len(), 4);
        assert_eq!(map.code("kayané"), Some(1));
        assert_eq!(map.code("stéphanie"), Some(2));
        assert_eq!(map.code("mark"), Some(3));
        assert_eq!(map.code("michel"), Some(4));
    }

    #[test]
    fn singleton_support() {
        let spec = PivSpec::stable("x", 0);
        let map = build_support(["x", "x"], ["x"], &spec, &MissingMarkers::default()).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map.code("x"), Some(1));
    }

    #[test]
    fn union_support_is_a_bijection() {
        let spec = PivSpec::stable("v", 0);
        let map = build_support(["a", "b"], ["b", "c"], &spec, &MissingMarkers::default()).unwrap();
        assert_eq!(map.len(), 3);
        for code in 1..=3 {
            assert_eq!(map.code(map.value(code).unwrap()), Some(code));
        }
        assert_eq!(map.value(0), None);
        assert_eq!(map.value(4), None);
    }

    #[test]
    fn all_missing_is_config_error() {
        let spec = PivSpec::stable("v", 0);
        let err = build_support(["", "NA"], ["na", " "], &spec, &MissingMarkers::default());
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn soundex_columns_share_codes() {
        let spec = PivSpec::stable("name", 0).with_soundex(true);
        let map = build_support(["mark"], ["marc", "michel"], &spec, &MissingMarkers::default())
            .unwrap();
        assert_eq!(map.len(), 2);
        assert_eq!(map.code("M620"), Some(1));
    }

    #[test]
    fn encode_maps_missing_to_zero_and_values_by_support() {
        let specs = vec![PivSpec::stable("name", 0), PivSpec::stable("sex", 0)];
        let a = raw(
            &["name", "sex", "t"],
            &[&["kayané", "f", "1.5"], &["stéphanie", "", "2"]],
        );
        let b = raw(
            &["sex", "name", "t"],
            &[&["m", "mark", "3"], &["NA", "michel", "4"]],
        );
        let (ea, eb, resolved, supports) =
            encode_pair(&a, &b, &specs, Some("t"), &MissingMarkers::default()).unwrap();
        assert_eq!(resolved[0].support_size, 4);
        assert_eq!(resolved[1].support_size, 2);
        assert_eq!(ea.row(0), &[1, 1]);
        assert_eq!(ea.row(1), &[2, 0]);
        assert_eq!(eb.row(0), &[3, 2]);
        assert_eq!(eb.row(1), &[4, 0]);
        assert_eq!(ea.times(), Some(&[1.5, 2.0][..]));
        assert_eq!(supports[0].value(3), Some("mark"));
        assert!(ea.check_codes(&resolved).is_ok());
    }

    #[test]
    fn encode_rejects_value_outside_support() {
        let specs = vec![PivSpec::stable("name", 2)];
        let mut map = SupportMap::default();
        map.insert("a");
        map.insert("b");
        let t = raw(&["name"], &[&["a"], &["zzz"]]);
        let err = encode_table(&t, &specs, &[map], None, &MissingMarkers::default()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Data(_)));
        assert!(msg.contains("zzz") && msg.contains("row 1") && msg.contains("name"), "{msg}");
    }

    #[test]
    fn bad_time_is_data_error() {
        let specs = vec![PivSpec::stable("v", 0)];
        let a = raw(&["v", "t"], &[&["x", "soon"]]);
        let err = encode_pair(&a, &a, &specs, Some("t"), &MissingMarkers::default()).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn glued_columns_encode_pairs() {
        let specs = vec![PivSpec::stable("state+region", 0)];
        let a = raw(&["state", "region"], &[&["2", "5"], &["2", "5"], &["3", ""]]);
        let (ea, _, resolved, _) =
            encode_pair(&a, &a, &specs, None, &MissingMarkers::default()).unwrap();
        assert_eq!(resolved[0].support_size, 1);
        assert_eq!(ea.column(0).collect::<Vec<_>>(), vec![1, 1, 0]);
    }

    #[test]
    fn merge_same_pair_same_code() {
        let t = RecordTable::from_rows(&[vec![2, 5, 1], vec![2, 5, 2], vec![0, 3, 1]], None)
            .unwrap();
        let (m, n) = merge_pivs(&t, 0, 1).unwrap();
        assert_eq!(n, 1);
        assert_eq!(m.n_pivs(), 2);
        assert_eq!(m.row(0), &[1, 1]);
        assert_eq!(m.row(1), &[1, 2]);
        assert_eq!(m.row(2), &[0, 1]);
    }

    #[test]
    fn merged_support_counts_distinct_observed_pairs() {
        let t = RecordTable::from_rows(
            &[vec![1, 1], vec![1, 2], vec![2, 1], vec![1, 1], vec![2, 0]],
            None,
        )
        .unwrap();
        let (m, n) = merge_pivs(&t, 1, 0).unwrap();
        assert_eq!(n, 3);
        assert_eq!(m.column(0).collect::<Vec<_>>(), vec![1, 2, 3, 1, 0]);
    }

    #[test]
    fn merge_shared_support_across_files() {
        let a = RecordTable::from_rows(&[vec![1, 1]], None).unwrap();
        let b = RecordTable::from_rows(&[vec![2, 2], vec![1, 1]], None).unwrap();
        let (out, n) = merge_pivs_shared(&[&a, &b], 0, 1).unwrap();
        assert_eq!(n, 2);
        assert_eq!(out[0].row(0), &[1]);
        assert_eq!(out[1].column(0).collect::<Vec<_>>(), vec![2, 1]);
        let spec = merged_spec(&PivSpec::stable("s", 2), &PivSpec::unstable("r", 2), n);
        assert!(!spec.stable);
        assert!((spec.mistake_bound - 0.19).abs() < 1e-12);
    }

    #[test]
    fn merge_rejects_same_column() {
        let t = RecordTable::from_rows(&[vec![1, 1]], None).unwrap();
        assert!(matches!(merge_pivs(&t, 1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn missing_rate_examples() {
        let t = RecordTable::from_rows(
            &[vec![1, 1, 0], vec![0, 2, 0], vec![2, 3, 0], vec![2, 1, 0]],
            None,
        )
        .unwrap();
        let r: Vec<f64> = missing_rates(&t);
        assert_eq!(r, vec![0.25, 0.0, 1.0]);
    }

    #[test]
    fn missing_markers_are_case_insensitive_and_configurable() {
        let m = MissingMarkers::default();
        assert!(m.is_missing(""));
        assert!(m.is_missing(" Na "));
        assert!(!m.is_missing("N/A"));
        let m = MissingMarkers::new(["N/A", "-"]);
        assert!(m.is_missing("n/a"));
        assert!(!m.is_missing(""));
    }

    proptest::proptest! {
        #[test]
        fn encode_then_reverse_is_identity(
            a in proptest::collection::vec("[a-e]{0,2}", 1..20),
            b in proptest::collection::vec("[a-e]{0,2}", 1..20),
        ) {
            let specs = vec![PivSpec::stable("v", 0)];
            let ra = RawTable { header: vec!["v".into()], rows: a.iter().map(|s| vec![s.clone()]).collect() };
            let rb = RawTable { header: vec!["v".into()], rows: b.iter().map(|s| vec![s.clone()]).collect() };
            let m = MissingMarkers::default();
            if a.iter().chain(&b).all(|s| s.is_empty()) {
                proptest::prop_assert!(encode_pair(&ra, &rb, &specs, None, &m).is_err());
            } else {
                let (ea, eb, resolved, supports) = encode_pair(&ra, &rb, &specs, None, &m).unwrap();
                for (table, src) in [(&ea, &a), (&eb, &b)] {
                    table.check_codes(&resolved).unwrap();
                    for (i, s) in src.iter().enumerate() {
                        let g = table.get(i, 0);
                        if s.is_empty() {
                            proptest::prop_assert_eq!(g, 0);
                        } else {
                            proptest::prop_assert_eq!(supports[0].value(g), Some(s.as_str()));
                        }
                    }
                }
            }
        }

        #[test]
        fn merge_preserves_missingness(rows in proptest::collection::vec((0u32..3, 0u32..4), 1..30)) {
            let t = RecordTable::from_rows(
                &rows.iter().map(|&(x, y)| vec![x, y]).collect::<Vec<_>>(), None).unwrap();
            let (m, _) = merge_pivs(&t, 0, 1).unwrap();
            proptest::prop_assert_eq!(m.n_records(), t.n_records());
            for (i, &(x, y)) in rows.iter().enumerate() {
                proptest::prop_assert_eq!(m.get(i, 0) == 0, x == 0 || y == 0);
            }
        }
    }
}

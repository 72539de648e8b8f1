//! Hourly load records, daily joint samples, min-max normalization and the
//! train/test split.
//!
//! A sample is one calendar day laid out as
//! `[cooling h0..h23 | heating h0..h23 | power h0..h23]`.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const HOURS: usize = 24;
pub const SAMPLE_LEN: usize = 3 * HOURS;
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";
pub const CSV_HEADER: [&str; 4] = ["timestamp", "cooling", "heating", "power"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadClass {
    Cooling,
    Heating,
    Power,
}

impl LoadClass {
    pub const ALL: [LoadClass; 3] = [LoadClass::Cooling, LoadClass::Heating, LoadClass::Power];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Offset of this class's 24 hours inside a sample.
    pub fn offset(self) -> usize {
        self.index() * HOURS
    }

    pub fn name(self) -> &'static str {
        match self {
            LoadClass::Cooling => "cooling",
            LoadClass::Heating => "heating",
            LoadClass::Power => "power",
        }
    }

    /// The class's hourly slice of a 72-value sample.
    pub fn slice(self, sample: &[f64]) -> &[f64] {
        &sample[self.offset()..self.offset() + HOURS]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadRecord {
    pub timestamp: NaiveDateTime,
    pub cooling: f64,
    pub heating: f64,
    pub power: f64,
}

/// Parsed CSV contents and the number of rows dropped as malformed.
#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub records: Vec<LoadRecord>,
    pub skipped_rows: usize,
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<CsvLoad> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file)
}

pub fn parse_csv(reader: impl Read) -> Result<CsvLoad> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Data(format!(
            "header must be `{}`, got `{}`",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut records = Vec::new();
    let mut skipped_rows = 0;
    let mut last: Option<(NaiveDateTime, usize)> = None;
    for (i, row) in rdr.records().enumerate() {
        // 1-based line number, header on line 1.
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                warn!("line {line}: unreadable row ({e}), dropped");
                skipped_rows += 1;
                continue;
            }
        };
        let timestamp = match row.get(0).map(|s| NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)) {
            Some(Ok(ts)) if ts.minute() == 0 => ts,
            _ => {
                warn!("line {line}: bad timestamp, dropped");
                skipped_rows += 1;
                continue;
            }
        };
        if let Some((prev, prev_line)) = last {
            if timestamp <= prev {
                return Err(Error::Data(format!(
                    "timestamps not strictly increasing at line {line} ({timestamp} after {prev} on line {prev_line})"
                )));
            }
        }
        last = Some((timestamp, line));

        let field = |k: usize| -> Option<f64> {
            row.get(k)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite() && *v >= 0.0)
        };
        match (field(1), field(2), field(3), row.len() == 4) {
            (Some(cooling), Some(heating), Some(power), true) => records.push(LoadRecord {
                timestamp,
                cooling,
                heating,
                power,
            }),
            _ => {
                warn!("line {line}: missing or invalid load value, dropped");
                skipped_rows += 1;
            }
        }
    }
    if records.is_empty() {
        return Err(Error::Data("no valid rows".into()));
    }
    if skipped_rows > 0 {
        warn!("{skipped_rows} malformed row(s) dropped");
    }
    Ok(CsvLoad {
        records,
        skipped_rows,
    })
}

/// One day's joint cooling/heating/power curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSample {
    pub date: NaiveDate,
    pub values: [f64; SAMPLE_LEN],
}

impl LoadSample {
    pub fn class(&self, class: LoadClass) -> &[f64] {
        class.slice(&self.values)
    }
}

#[derive(Debug, Clone)]
pub struct DailySamples {
    pub samples: Vec<LoadSample>,
    pub skipped_days: usize,
}

/// Groups hourly records into per-day samples; days without all 24 hours
/// are skipped and counted.
pub fn assemble_daily_samples(records: &[LoadRecord]) -> DailySamples {
    let mut days: BTreeMap<NaiveDate, [Option<(f64, f64, f64)>; HOURS]> = BTreeMap::new();
    for r in records {
        let slot = days.entry(r.timestamp.date()).or_insert([None; HOURS]);
        slot[r.timestamp.hour() as usize] = Some((r.cooling, r.heating, r.power));
    }
    let mut samples = Vec::with_capacity(days.len());
    let mut skipped_days = 0;
    for (date, hours) in days {
        if hours.iter().any(Option::is_none) {
            skipped_days += 1;
            continue;
        }
        let mut values = [0.0; SAMPLE_LEN];
        for (h, v) in hours.iter().enumerate() {
            let (c, ht, p) = v.expect("checked complete");
            values[h] = c;
            values[HOURS + h] = ht;
            values[2 * HOURS + h] = p;
        }
        samples.push(LoadSample { date, values });
    }
    if skipped_days > 0 {
        warn!("{skipped_days} incomplete day(s) skipped");
    }
    DailySamples {
        samples,
        skipped_days,
    }
}

/// Per-class min-max scaling fitted on training samples, mapping
/// `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

pub fn fit_normalizer(train: &[LoadSample]) -> Result<Normalizer> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("cannot fit normalizer on zero samples".into()));
    }
    let mut min = [f64::INFINITY; 3];
    let mut max = [f64::NEG_INFINITY; 3];
    for s in train {
        for class in LoadClass::ALL {
            for &v in s.class(class) {
                let c = class.index();
                min[c] = min[c].min(v);
                max[c] = max[c].max(v);
            }
        }
    }
    for class in LoadClass::ALL {
        let c = class.index();
        if !(max[c] > min[c]) {
            return Err(Error::Data(format!(
                "{} load is constant ({}) in the training set",
                class.name(),
                min[c]
            )));
        }
    }
    Ok(Normalizer { min, max })
}

impl Normalizer {
    fn check(values: &[f64]) -> Result<()> {
        if values.len() != SAMPLE_LEN {
            return Err(Error::Shape(format!("expected {SAMPLE_LEN} values, got {}", values.len())));
        }
        Ok(())
    }

    /// Physical values to the network range. Values outside the fitted
    /// range land outside `[-1, 1]`; nothing is clipped.
    pub fn normalize(&self, values: &[f64]) -> Result<[f64; SAMPLE_LEN]> {
        Self::check(values)?;
        let mut out = [0.0; SAMPLE_LEN];
        for (i, (o, &x)) in out.iter_mut().zip(values).enumerate() {
            let c = i / HOURS;
            let unit = (x - self.min[c]) / (self.max[c] - self.min[c]);
            *o = 2.0 * unit - 1.0;
        }
        Ok(out)
    }

    pub fn invert(&self, normalized: &[f64]) -> Result<[f64; SAMPLE_LEN]> {
        Self::check(normalized)?;
        let mut out = [0.0; SAMPLE_LEN];
        for (i, (o, &y)) in out.iter_mut().zip(normalized).enumerate() {
            let c = i / HOURS;
            let unit = (y + 1.0) / 2.0;
            *o = unit * (self.max[c] - self.min[c]) + self.min[c];
        }
        Ok(out)
    }

    /// Normalizes a set of samples into a `[n, 72]` tensor.
    pub fn normalize_batch(&self, samples: &[LoadSample]) -> Result<Tensor> {
        let rows = samples
            .iter()
            .map(|s| self.normalize(&s.values))
            .collect::<Result<Vec<_>>>()?;
        Tensor::from_rows(&rows)
    }
}

/// Network range `[-1, 1]` back to the `[0, 1]` min-max range.
pub fn to_unit_range(normalized: f64) -> f64 {
    (normalized + 1.0) / 2.0
}

/// Seeded uniform random partition. Both parts keep the input order.
pub fn split_train_test(
    samples: &[LoadSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LoadSample>, Vec<LoadSample>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::Data(format!("need at least 2 samples to split, got {n}")));
    }
    let n_train = ((n as f64 * fraction).round() as usize).clamp(1, n - 1);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_train = vec![false; n];
    for &i in &idx[..n_train] {
        is_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = samples
        .iter()
        .zip(&is_train)
        .partition(|(_, &t)| t);
    Ok((
        train.into_iter().map(|(s, _)| s.clone()).collect(),
        test.into_iter().map(|(s, _)| s.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn csv(rows: &[&str]) -> String {
        let mut s = String::from("timestamp,cooling,heating,power\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    fn hourly(days: usize, skip: Option<(usize, usize)>) -> String {
        let start = NaiveDate::from_ymd_opt(2011, 7, 17).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut s = String::from("timestamp,cooling,heating,power\n");
        for h in 0..days * HOURS {
            let ts = start + chrono::Duration::hours(h as i64);
            let heating = if skip == Some((h / HOURS, h % HOURS)) {
                String::new()
            } else {
                format!("{}", 2.0 + h as f64)
            };
            s.push_str(&format!("{},{},{},{}\n", ts.format(TIMESTAMP_FORMAT), h, heating, 3 * h));
        }
        s
    }

    fn sample(fill: impl Fn(usize) -> f64) -> LoadSample {
        let mut values = [0.0; SAMPLE_LEN];
        for (i, v) in values.iter_mut().enumerate() {
            *v = fill(i);
        }
        LoadSample {
            date: NaiveDate::from_ymd_opt(2012, 1, 1).unwrap(),
            values,
        }
    }

    #[test]
    fn parses_well_formed_rows() {
        let text = csv(&[
            "2011-07-17T00:00,1.0,2.0,3.0",
            "2011-07-17T01:00,1.5,2.5,3.5",
            "2011-07-17T02:00,0,0,0",
        ]);
        let out = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.skipped_rows, 0);
        assert_eq!(out.records[1].heating, 2.5);
    }

    #[test]
    fn empty_cell_dropped_with_count() {
        let text = csv(&["2011-07-17T00:00,1.0,,3.0", "2011-07-17T01:00,1.5,2.5,3.5"]);
        let out = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped_rows, 1);
    }

    #[test]
    fn out_of_order_is_fatal_and_names_row() {
        let text = csv(&[
            "2011-07-17T01:00,1,1,1",
            "2011-07-17T02:00,1,1,1",
            "2011-07-17T00:00,1,1,1",
        ]);
        let err = parse_csv(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
    }

    #[test]
    fn bad_header_and_empty_rejected() {
        assert!(parse_csv("time,c,h,p\n2011-07-17T00:00,1,1,1\n".as_bytes()).is_err());
        assert!(parse_csv(csv(&["2011-07-17T00:00,x,1,1"]).as_bytes()).is_err());
    }

    #[test]
    fn assembles_complete_days() {
        let recs = parse_csv(hourly(2, None).as_bytes()).unwrap().records;
        let days = assemble_daily_samples(&recs);
        assert_eq!(days.samples.len(), 2);
        assert_eq!(days.skipped_days, 0);
        let s = &days.samples[1];
        assert_eq!(s.class(LoadClass::Cooling)[0], 24.0);
        assert_eq!(s.class(LoadClass::Heating)[0], 26.0);
        assert_eq!(s.class(LoadClass::Power)[23], 3.0 * 47.0);
    }

    #[test]
    fn incomplete_day_skipped() {
        let load = parse_csv(hourly(3, Some((1, 13))).as_bytes()).unwrap();
        assert_eq!(load.skipped_rows, 1);
        let days = assemble_daily_samples(&load.records);
        assert_eq!(days.samples.len(), 2);
        assert_eq!(days.skipped_days, 1);
    }

    #[test]
    fn full_span_of_days() {
        let recs = parse_csv(hourly(416, None).as_bytes()).unwrap().records;
        assert_eq!(assemble_daily_samples(&recs).samples.len(), 416);
    }

    #[test]
    fn normalizer_fit_and_endpoints() {
        let train: Vec<_> = (0..=10)
            .map(|k| sample(|i| if i < HOURS { k as f64 } else { (i + k) as f64 }))
            .collect();
        let norm = fit_normalizer(&train).unwrap();
        assert_eq!((norm.min[0], norm.max[0]), (0.0, 10.0));

        let mut seen_min = [f64::INFINITY; 3];
        let mut seen_max = [f64::NEG_INFINITY; 3];
        for s in &train {
            let n = norm.normalize(&s.values).unwrap();
            for (i, v) in n.iter().enumerate() {
                seen_min[i / HOURS] = seen_min[i / HOURS].min(*v);
                seen_max[i / HOURS] = seen_max[i / HOURS].max(*v);
            }
        }
        assert_eq!(seen_min, [-1.0; 3]);
        assert_eq!(seen_max, [1.0; 3]);

        let mid = sample(|i| if i < HOURS { 5.0 } else { 30.0 });
        assert_eq!(norm.normalize(&mid.values).unwrap()[0], 0.0);
    }

    #[test]
    fn constant_class_rejected() {
        let train = vec![sample(|i| if i >= 2 * HOURS { 1.0 } else { i as f64 })];
        assert!(matches!(fit_normalizer(&train), Err(Error::Data(_))));
    }

    #[test]
    fn test_values_outside_range_not_clipped() {
        let norm = Normalizer {
            min: [0.0; 3],
            max: [10.0; 3],
        };
        let out = norm.normalize(&sample(|_| 12.0).values).unwrap();
        assert!((out[0] - 1.4).abs() < 1e-12);
        let out = norm.normalize(&sample(|_| -5.0).values).unwrap();
        assert_eq!(out[0], -2.0);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let samples: Vec<_> = (0..10).map(|k| sample(move |i| (i * k) as f64)).collect();
        let (train, test) = split_train_test(&samples, 0.8, 3).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train2, test2) = split_train_test(&samples, 0.8, 3).unwrap();
        assert_eq!(train, train2);
        assert_eq!(test, test2);
        assert!(split_train_test(&samples[..1], 0.8, 0).is_err());
        assert!(split_train_test(&samples, 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_and_monotone(
            lo in -100.0f64..100.0,
            span in 0.1f64..1000.0,
            xs in proptest::collection::vec(-2000.0f64..2000.0, SAMPLE_LEN),
        ) {
            let norm = Normalizer { min: [lo; 3], max: [lo + span; 3] };
            let n = norm.normalize(&xs).unwrap();
            let back = norm.invert(&n).unwrap();
            for (a, b) in xs.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * (a.abs() + lo.abs() + span));
            }
            for i in 0..SAMPLE_LEN - 1 {
                if i / HOURS == (i + 1) / HOURS && xs[i] < xs[i + 1] {
                    prop_assert!(n[i] < n[i + 1]);
                }
            }
        }

        #[test]
        fn split_is_a_partition(n in 2usize..60, frac in 0.05f64..0.95, seed in any::<u64>()) {
            let samples: Vec<_> = (0..n).map(|k| sample(move |i| (i + 100 * k) as f64)).collect();
            let (train, test) = split_train_test(&samples, frac, seed).unwrap();
            prop_assert_eq!(train.len() + test.len(), n);
            for t in &test {
                prop_assert!(!train.contains(t));
            }
        }
    }
}

//! Cohen's kappa between two binary codings of the same posts.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CodedRow;

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("codings cover different posts: only in first {only_first:?}, only in second {only_second:?}")]
    EntryMismatch { only_first: Vec<u64>, only_second: Vec<u64> },
    #[error("code `{0}` is missing from one of the codings")]
    UnknownCode(String),
    #[error("no rows to compare")]
    Empty,
    #[error("band thresholds must be strictly increasing: {0:?}")]
    Thresholds(BandThresholds),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, AgreementError>;

/// 2×2 tallies: `a` both 1, `b` first only, `c` second only, `d` both 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ConfusionCounts {
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// The same table with the raters swapped.
    pub fn transposed(&self) -> Self {
        ConfusionCounts { a: self.a, b: self.c, c: self.b, d: self.d }
    }

    pub fn tally(first: impl IntoIterator<Item = bool>, second: impl IntoIterator<Item = bool>) -> Self {
        let mut out = ConfusionCounts::default();
        for (x, y) in first.into_iter().zip(second) {
            match (x, y) {
                (true, true) => out.a += 1,
                (true, false) => out.b += 1,
                (false, true) => out.c += 1,
                (false, false) => out.d += 1,
            }
        }
        out
    }
}

/// Tallies one code over two codings aligned by entry id.
pub fn confusion(first: &[CodedRow], second: &[CodedRow], code: &str) -> Result<ConfusionCounts> {
    let pairs = align(first, second)?;
    if pairs.iter().any(|(x, y)| !x.code_flags.contains_key(code) || !y.code_flags.contains_key(code)) {
        return Err(AgreementError::UnknownCode(code.to_string()));
    }
    Ok(ConfusionCounts::tally(pairs.iter().map(|(x, _)| x.flag(code)), pairs.iter().map(|(_, y)| y.flag(code))))
}

fn align<'a>(first: &'a [CodedRow], second: &'a [CodedRow]) -> Result<Vec<(&'a CodedRow, &'a CodedRow)>> {
    let ids1: BTreeSet<u64> = first.iter().map(|r| r.entry_id).collect();
    let ids2: BTreeSet<u64> = second.iter().map(|r| r.entry_id).collect();
    if ids1 != ids2 || ids1.len() != first.len() || ids2.len() != second.len() {
        return Err(AgreementError::EntryMismatch {
            only_first: ids1.difference(&ids2).copied().collect(),
            only_second: ids2.difference(&ids1).copied().collect(),
        });
    }
    if first.is_empty() {
        return Err(AgreementError::Empty);
    }
    let mut a: Vec<&CodedRow> = first.iter().collect();
    let mut b: Vec<&CodedRow> = second.iter().collect();
    a.sort_by_key(|r| r.entry_id);
    b.sort_by_key(|r| r.entry_id);
    Ok(a.into_iter().zip(b).collect())
}

/// κ = (p_o − p_e) / (1 − p_e). When both raters use a single category
/// (p_e = 1) the ratio is undefined; that case returns 1 for full agreement
/// and 0 otherwise.
pub fn kappa(counts: &ConfusionCounts) -> f64 {
    let n = counts.n() as f64;
    assert!(n > 0.0, "kappa of an empty table");
    let (a, b, c, d) = (counts.a as f64, counts.b as f64, counts.c as f64, counts.d as f64);
    let p_o = (a + d) / n;
    let p_e = ((a + b) * (a + c) + (c + d) * (b + d)) / (n * n);
    if p_e >= 1.0 {
        return if p_o >= 1.0 { 1.0 } else { 0.0 };
    }
    ((p_o - p_e) / (1.0 - p_e)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Band {
    None,
    Minimal,
    Weak,
    Moderate,
    Strong,
    AlmostPerfect,
}

impl Band {
    pub fn as_str(self) -> &'static str {
        match self {
            Band::None => "none",
            Band::Minimal => "minimal",
            Band::Weak => "weak",
            Band::Moderate => "moderate",
            Band::Strong => "strong",
            Band::AlmostPerfect => "almost-perfect",
        }
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Lower bounds of each band; anything below `minimal` is `none`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandThresholds {
    pub minimal: f64,
    pub weak: f64,
    pub moderate: f64,
    pub strong: f64,
    pub almost_perfect: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds { minimal: 0.20, weak: 0.40, moderate: 0.60, strong: 0.80, almost_perfect: 0.90 }
    }
}

impl BandThresholds {
    pub fn validate(&self) -> Result<()> {
        let t = [self.minimal, self.weak, self.moderate, self.strong, self.almost_perfect];
        if t.windows(2).all(|w| w[0] < w[1]) && t.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(AgreementError::Thresholds(*self))
        }
    }

    pub fn band(&self, kappa: f64) -> Band {
        // Bands are reported at two decimals, so classify the rounded value:
        // a kappa printed as 0.80 must not be labelled moderate.
        let k = (kappa * 100.0).round() / 100.0;
        if k >= self.almost_perfect {
            Band::AlmostPerfect
        } else if k >= self.strong {
            Band::Strong
        } else if k >= self.moderate {
            Band::Moderate
        } else if k >= self.weak {
            Band::Weak
        } else if k >= self.minimal {
            Band::Minimal
        } else {
            Band::None
        }
    }
}

pub fn band(kappa: f64) -> Band {
    BandThresholds::default().band(kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeAgreement {
    pub code: String,
    pub counts: ConfusionCounts,
    pub kappa: f64,
    pub band: Band,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub per_code: Vec<CodeAgreement>,
    pub thresholds: BandThresholds,
}

impl KappaReport {
    pub fn get(&self, code: &str) -> Option<&CodeAgreement> {
        self.per_code.iter().find(|c| c.code == code)
    }

    /// `code,a,b,c,d,kappa,band` with kappa to six decimals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["code", "a", "b", "c", "d", "kappa", "band"])?;
        for c in &self.per_code {
            w.write_record([
                c.code.clone(),
                c.counts.a.to_string(),
                c.counts.b.to_string(),
                c.counts.c.to_string(),
                c.counts.d.to_string(),
                format!("{:.6}", c.kappa),
                c.band.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Kappa for every code, in the order given.
pub fn kappa_report(
    first: &[CodedRow],
    second: &[CodedRow],
    codes: &[String],
    thresholds: &BandThresholds,
) -> Result<KappaReport> {
    thresholds.validate()?;
    let per_code = codes
        .iter()
        .map(|code| {
            let counts = confusion(first, second, code)?;
            let k = kappa(&counts);
            Ok(CodeAgreement { code: code.clone(), counts, kappa: k, band: thresholds.band(k) })
        })
        .collect::<Result<_>>()?;
    Ok(KappaReport { per_code, thresholds: *thresholds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, Source};
    use crate::rng::Rng;
    use std::collections::BTreeMap;

    /// Independent formula: Cohen's kappa via marginal proportions.
    fn oracle(a: u64, b: u64, c: u64, d: u64) -> f64 {
        let n = (a + b + c + d) as f64;
        let agree = (a + d) as f64 / n;
        let first_yes = (a + b) as f64 / n;
        let second_yes = (a + c) as f64 / n;
        let chance = first_yes * second_yes + (1.0 - first_yes) * (1.0 - second_yes);
        if (1.0 - chance).abs() < 1e-15 {
            return if (agree - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 };
        }
        (agree - chance) / (1.0 - chance)
    }

    fn rows(flags: &[u8], source: Source) -> Vec<CodedRow> {
        flags
            .iter()
            .enumerate()
            .map(|(i, &f)| CodedRow {
                entry_id: i as u64 + 1,
                user_id: "u".into(),
                timestamp: parse_timestamp("2021-01-01").unwrap(),
                text: String::new(),
                semester: None,
                code_flags: BTreeMap::from([("x".to_string(), f == 1)]),
                source,
            })
            .collect()
    }

    #[test]
    fn exhaustive_small_tables_match_oracle() {
        for n in 1..=12u64 {
            for a in 0..=n {
                for b in 0..=n - a {
                    for c in 0..=n - a - b {
                        let d = n - a - b - c;
                        let t = ConfusionCounts { a, b, c, d };
                        let k = kappa(&t);
                        assert!((k - oracle(a, b, c, d)).abs() < 1e-12, "{t:?}");
                        assert!((-1.0..=1.0).contains(&k));
                        assert_eq!(k, kappa(&t.transposed()));
                    }
                }
            }
        }
    }

    #[test]
    fn identical_codings() {
        let r = rows(&[1, 1, 1, 1, 0, 0, 0, 0, 0, 0], Source::Algorithm);
        let t = confusion(&r, &r, "x").unwrap();
        assert_eq!(t, ConfusionCounts { a: 4, b: 0, c: 0, d: 6 });
        assert_eq!(kappa(&t), 1.0);
    }

    #[test]
    fn complementary_codings() {
        let r1 = rows(&[1, 0, 1, 0], Source::Algorithm);
        let r2 = rows(&[0, 1, 0, 1], Source::Human);
        let t = confusion(&r1, &r2, "x").unwrap();
        assert_eq!((t.a, t.d), (0, 0));
        assert_eq!(kappa(&t), -1.0);
    }

    #[test]
    fn hand_counted_fixture() {
        // rows 1-4 both coded, row 5 algorithm only, row 6 human only, 7-10 neither
        let r1 = rows(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0], Source::Algorithm);
        let r2 = rows(&[1, 1, 1, 1, 0, 1, 0, 0, 0, 0], Source::Human);
        let t = confusion(&r1, &r2, "x").unwrap();
        assert_eq!(t, ConfusionCounts { a: 4, b: 1, c: 1, d: 4 });
        assert!((kappa(&t) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn single_category_degenerate() {
        assert_eq!(kappa(&ConfusionCounts { a: 0, b: 0, c: 0, d: 5 }), 1.0);
        assert_eq!(kappa(&ConfusionCounts { a: 7, b: 0, c: 0, d: 0 }), 1.0);
    }

    #[test]
    fn mismatched_ids_listed() {
        let r1 = rows(&[1, 0, 1], Source::Algorithm);
        let mut r2 = rows(&[1, 0], Source::Human);
        r2[1].entry_id = 9;
        match confusion(&r1, &r2, "x") {
            Err(AgreementError::EntryMismatch { only_first, only_second }) => {
                assert_eq!(only_first, [2, 3]);
                assert_eq!(only_second, [9]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn order_of_rows_is_irrelevant() {
        let r1 = rows(&[1, 1, 0, 0, 1], Source::Algorithm);
        let mut r2 = rows(&[1, 0, 0, 1, 1], Source::Human);
        let before = confusion(&r1, &r2, "x").unwrap();
        r2.reverse();
        assert_eq!(confusion(&r1, &r2, "x").unwrap(), before);
    }

    #[test]
    fn bands() {
        for (k, b) in [
            (-0.3, Band::None),
            (0.0, Band::None),
            (0.19, Band::None),
            (0.23, Band::Minimal),
            (0.36, Band::Minimal),
            (0.52, Band::Weak),
            (0.70, Band::Moderate),
            (0.77, Band::Moderate),
            (0.79, Band::Moderate),
            (0.81, Band::Strong),
            (0.8, Band::Strong),
            (0.899, Band::AlmostPerfect),
            (0.95, Band::AlmostPerfect),
            (1.0, Band::AlmostPerfect),
        ] {
            assert_eq!(band(k), b, "kappa {k}");
        }
    }

    #[test]
    fn custom_thresholds() {
        let t = BandThresholds { moderate: 0.5, ..Default::default() };
        assert_eq!(t.band(0.52), Band::Moderate);
        let bad = BandThresholds { weak: 0.1, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn independent_random_codings_near_zero() {
        let mut rng = Rng::new(7);
        let n = 10_000;
        let x: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.3).collect();
        let y: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.4).collect();
        let k = kappa(&ConfusionCounts::tally(x, y));
        assert!(k.abs() < 0.05, "kappa {k}");
    }

    #[test]
    fn report_csv_and_json() {
        let r1 = rows(&[1, 1, 1, 1, 1, 0, 0, 0, 0, 0], Source::Algorithm);
        let r2 = rows(&[1, 1, 1, 1, 0, 1, 0, 0, 0, 0], Source::Human);
        let report = kappa_report(&r1, &r2, &["x".to_string()], &BandThresholds::default()).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "code,a,b,c,d,kappa,band\nx,4,1,1,4,0.600000,moderate\n");
        let v = serde_json::to_value(&report).unwrap();
        assert_eq!(v["per_code"][0]["band"], "moderate");
        assert!(matches!(
            kappa_report(&r1, &r2, &["y".to_string()], &BandThresholds::default()),
            Err(AgreementError::UnknownCode(_))
        ));
    }
}

//! On-disk formats. Every text format starts with a `# rfprint-<kind> v1`
//! line; floats are written in shortest round-trip form so a file read back
//! reproduces the in-memory values exactly.
//!
//! | file | columns |
//! |------|---------|
//! | traces | `pass_id,time_s,link_id,rssi_dbm` |
//! | features | `vehicle_id,v_est,l_est,t_drop,b,m,m_l,n,label` |
//! | link features | `vehicle_id,link_id,v_est,...,n,label` |
//! | raw | `vehicle_id,link_id,x0..x{L-1},label` |
//! | manifest | JSON lines of [`ManifestEntry`] |

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::channel::{split_by_link, PassWindow, RssiSample, RssiTrace};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, RawVector};
use crate::learn::{Dataset, Label, Representation};
use crate::scenario::VehicleProfile;

pub const TRACE_MAGIC: &str = "# rfprint-trace v1";
pub const TRACE_HEADER: &str = "pass_id,time_s,link_id,rssi_dbm";
pub const FEATURES_MAGIC: &str = "# rfprint-features v1";
pub const LINK_FEATURES_MAGIC: &str = "# rfprint-link-features v1";
pub const RAW_MAGIC: &str = "# rfprint-raw v1";

fn io_err(e: std::io::Error) -> Error {
    Error::InvalidConfig(format!("i/o error: {e}"))
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, name: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {name}")))?;
    tok.trim().parse().map_err(|_| parse_err(line, format!("bad {name} {tok:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub pass_id: u64,
    pub sample: RssiSample,
}

pub fn write_trace_header<W: Write>(w: &mut W) -> Result<()> {
    writeln!(w, "{TRACE_MAGIC}\n{TRACE_HEADER}").map_err(io_err)
}

pub fn write_trace_rows<W: Write>(w: &mut W, pass_id: u64, samples: &[RssiSample]) -> Result<()> {
    for s in samples {
        writeln!(w, "{pass_id},{},{},{}", s.time, s.link_id, s.rssi).map_err(io_err)?;
    }
    Ok(())
}

/// Incremental trace reader for files and live feeds alike.
pub struct TraceReader<R> {
    lines: std::io::Lines<R>,
    line: usize,
    header_seen: bool,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Self {
        Self { lines: reader.lines(), line: 0, header_seen: false }
    }

    fn parse_row(&self, text: &str) -> Result<TraceRow> {
        let mut it = text.split(',');
        let pass_id = field(it.next(), self.line, "pass_id")?;
        let time: f64 = field(it.next(), self.line, "time_s")?;
        let link_id = field(it.next(), self.line, "link_id")?;
        let rssi = field(it.next(), self.line, "rssi_dbm")?;
        if it.next().is_some() {
            return Err(parse_err(self.line, "too many columns"));
        }
        if !time.is_finite() {
            return Err(parse_err(self.line, "non-finite time"));
        }
        Ok(TraceRow { pass_id, sample: RssiSample { time, link_id, rssi } })
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<TraceRow>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(io_err(e))),
            };
            self.line += 1;
            let t = text.trim();
            if t.is_empty() {
                continue;
            }
            if t.starts_with('#') {
                if self.line == 1 && t != TRACE_MAGIC {
                    return Some(Err(parse_err(1, format!("unsupported trace format {t:?}"))));
                }
                continue;
            }
            if !self.header_seen {
                self.header_seen = true;
                if t == TRACE_HEADER {
                    continue;
                }
                return Some(Err(parse_err(self.line, format!("expected header {TRACE_HEADER:?}"))));
            }
            return Some(self.parse_row(t));
        }
    }
}

/// Groups rows by pass and splits each pass into nine link traces.
pub fn group_passes(rows: &[TraceRow]) -> Result<Vec<(u64, Vec<RssiTrace>)>> {
    let mut by_pass: BTreeMap<u64, Vec<RssiSample>> = BTreeMap::new();
    for r in rows {
        by_pass.entry(r.pass_id).or_default().push(r.sample);
    }
    by_pass.into_iter().map(|(id, s)| Ok((id, split_by_link(&s)?))).collect()
}

/// Ground truth for one synthesized pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pass_id: u64,
    pub vehicle: VehicleProfile,
    pub window: PassWindow,
    pub seed: u64,
}

pub fn write_manifest<W: Write>(w: &mut W, entries: &[ManifestEntry]) -> Result<()> {
    for e in entries {
        let line = serde_json::to_string(e).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err)?;
    }
    Ok(())
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| parse_err(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// One labelled pass in the feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub vehicle_id: u64,
    pub features: FeatureVector,
    pub label: Label,
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn write_features<W: Write>(w: &mut W, rows: &[FeatureRow]) -> Result<()> {
    writeln!(w, "{FEATURES_MAGIC}\nvehicle_id,{},label", FeatureVector::NAMES.join(",")).map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{}", r.vehicle_id, join(&r.features.to_array()), r.label).map_err(io_err)?;
    }
    Ok(())
}

/// One link's feature row (link-local scalars with the pass velocity and length).
#[derive(Debug, Clone, PartialEq)]
pub struct LinkFeatureRow {
    pub vehicle_id: u64,
    pub link_id: u8,
    pub features: FeatureVector,
    pub label: Label,
}

pub fn write_link_features<W: Write>(w: &mut W, rows: &[LinkFeatureRow]) -> Result<()> {
    writeln!(w, "{LINK_FEATURES_MAGIC}\nvehicle_id,link_id,{},label", FeatureVector::NAMES.join(",")).map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.vehicle_id, r.link_id, join(&r.features.to_array()), r.label).map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub vehicle_id: u64,
    pub raw: RawVector,
    pub label: Label,
}

pub fn write_raw<W: Write>(w: &mut W, rows: &[RawRow]) -> Result<()> {
    let len = rows.first().map_or(0, |r| r.raw.values.len());
    let cols: Vec<String> = (0..len).map(|i| format!("x{i}")).collect();
    writeln!(w, "{RAW_MAGIC}\nvehicle_id,link_id,{},label", cols.join(",")).map_err(io_err)?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.vehicle_id, r.raw.link_id, join(&r.raw.values), r.label).map_err(io_err)?;
    }
    Ok(())
}

/// A table read back as `(ids, link ids, inputs, labels)`; link ids are
/// zero for the pass-level feature table.
struct Table {
    ids: Vec<u64>,
    links: Vec<u8>,
    inputs: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

fn read_table<R: BufRead>(r: R, magic: &str, has_link: bool) -> Result<Table> {
    let mut t = Table { ids: Vec::new(), links: Vec::new(), inputs: Vec::new(), labels: Vec::new() };
    let mut dim = None;
    for (i, line) in r.lines().enumerate() {
        let n = i + 1;
        let line = line.map_err(io_err)?;
        let s = line.trim();
        if n == 1 {
            if s != magic {
                return Err(parse_err(1, format!("expected {magic:?}")));
            }
            continue;
        }
        if n == 2 || s.is_empty() {
            // header
            if n == 2 {
                let cols = s.split(',').count();
                dim = Some(cols - 2 - usize::from(has_link));
            }
            continue;
        }
        let toks: Vec<&str> = s.split(',').collect();
        let d = dim.ok_or_else(|| parse_err(n, "missing header"))?;
        let expect = d + 2 + usize::from(has_link);
        if toks.len() != expect {
            return Err(parse_err(n, format!("expected {expect} columns, found {}", toks.len())));
        }
        t.ids.push(field(Some(toks[0]), n, "vehicle_id")?);
        let start = if has_link {
            t.links.push(field(Some(toks[1]), n, "link_id")?);
            2
        } else {
            t.links.push(0);
            1
        };
        let x = toks[start..start + d].iter().map(|v| field::<f64>(Some(v), n, "value")).collect::<Result<Vec<_>>>()?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(n, "non-finite value"));
        }
        t.inputs.push(x);
        let label: Label = toks[expect - 1].parse().map_err(|e: String| parse_err(n, e))?;
        t.labels.push(label);
    }
    Ok(t)
}

/// Reads a feature table as a dataset plus the vehicle ids in row order.
pub fn read_features<R: BufRead>(r: R) -> Result<(Vec<u64>, Dataset)> {
    let t = read_table(r, FEATURES_MAGIC, false)?;
    Ok((t.ids, Dataset::new(t.inputs, t.labels, Representation::FeatureVector)?))
}

pub fn read_raw<R: BufRead>(r: R) -> Result<(Vec<u64>, Dataset)> {
    let t = read_table(r, RAW_MAGIC, true)?;
    Ok((t.ids, Dataset::new(t.inputs, t.labels, Representation::RawData)?))
}

/// Reads link feature rows into nine datasets, link 1 first.
pub fn read_link_features<R: BufRead>(r: R) -> Result<Vec<Dataset>> {
    let t = read_table(r, LINK_FEATURES_MAGIC, true)?;
    let mut per: Vec<(Vec<Vec<f64>>, Vec<Label>)> = vec![(Vec::new(), Vec::new()); 9];
    for ((link, x), l) in t.links.iter().zip(t.inputs).zip(t.labels) {
        if !(1..=9).contains(link) {
            return Err(Error::UnknownLink(*link));
        }
        let slot = &mut per[usize::from(link - 1)];
        slot.0.push(x);
        slot.1.push(l);
    }
    per.into_iter().map(|(x, y)| Dataset::new(x, y, Representation::FeatureVector)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(seed: f64) -> FeatureVector {
        FeatureVector {
            v_est: 20.0 + seed,
            l_est: 4.1 / 3.0,
            t_drop: 0.1 + 0.2,
            bulge: 1.0 / 7.0,
            magnitude: 25.0,
            local_magnitude: 19.5,
            deep_minima: 1.0,
            vehicle_id: None,
            links: vec![1],
        }
    }

    #[test]
    fn traces_round_trip_exactly() {
        let samples: Vec<RssiSample> = (0..20)
            .map(|i| RssiSample { time: 0.5 + f64::from(i) * 0.009 + 0.003, link_id: (i % 9) as u8 + 1, rssi: -55 - i })
            .collect();
        let mut buf = Vec::new();
        write_trace_header(&mut buf).unwrap();
        write_trace_rows(&mut buf, 7, &samples).unwrap();
        let rows: Vec<TraceRow> = TraceReader::new(buf.as_slice()).collect::<Result<_>>().unwrap();
        assert_eq!(rows.iter().map(|r| r.sample).collect::<Vec<_>>(), samples);
        assert!(rows.iter().all(|r| r.pass_id == 7));
        let passes = group_passes(&rows).unwrap();
        assert_eq!(passes.len(), 1);
        assert_eq!(passes[0].1.len(), 9);
    }

    #[test]
    fn malformed_trace_row_reports_line() {
        let text = format!("{TRACE_MAGIC}\n{TRACE_HEADER}\n0,0.1,1,-50\n0,zero,1,-50\n");
        let r: Result<Vec<TraceRow>> = TraceReader::new(text.as_bytes()).collect();
        assert!(matches!(r, Err(Error::Parse { line: 4, .. })));
        let r: Result<Vec<TraceRow>> = TraceReader::new("# other v9\n".as_bytes()).collect();
        assert!(matches!(r, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn feature_tables_round_trip() {
        let rows: Vec<FeatureRow> =
            (0..4).map(|i| FeatureRow { vehicle_id: i, features: fv(i as f64), label: Label::from_index(i as usize % 2) }).collect();
        let mut buf = Vec::new();
        write_features(&mut buf, &rows).unwrap();
        let (ids, d) = read_features(buf.as_slice()).unwrap();
        assert_eq!(ids, vec![0, 1, 2, 3]);
        assert_eq!(d.inputs[2], fv(2.0).to_array().to_vec());
        assert_eq!(d.labels[1], Label::Truck);

        let raw: Vec<RawRow> = (0..3)
            .map(|i| RawRow { vehicle_id: i, raw: RawVector { link_id: 1, values: vec![0.1 * i as f64, -1.0, 2.5] }, label: Label::Car })
            .collect();
        let mut buf = Vec::new();
        write_raw(&mut buf, &raw).unwrap();
        let (_, d) = read_raw(buf.as_slice()).unwrap();
        assert_eq!(d.dim(), 3);
        assert_eq!(d.inputs[1], raw[1].raw.values);

        let links: Vec<LinkFeatureRow> = (1..=9u8)
            .map(|l| LinkFeatureRow { vehicle_id: 0, link_id: l, features: fv(f64::from(l)), label: Label::Car })
            .collect();
        let mut buf = Vec::new();
        write_link_features(&mut buf, &links).unwrap();
        let per = read_link_features(buf.as_slice()).unwrap();
        assert_eq!(per.len(), 9);
        assert_eq!(per[4].inputs[0][0], 25.0);
    }
}

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::model::Method;

use super::CellResult;

/// Balanced accuracy of one method on one held-out domain across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub hold_out: String,
    /// One entry per table seed; `None` when that run did not finish.
    pub per_seed: Vec<Option<f64>>,
    pub mean: f64,
    /// Population standard deviation over the finished seeds.
    pub std: f64,
}

impl ResultRow {
    pub fn new(method: Method, hold_out: String, per_seed: Vec<Option<f64>>) -> Self {
        let vals: Vec<f64> = per_seed.iter().flatten().copied().collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        Self {
            method,
            hold_out,
            per_seed,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<ResultRow>,
}

const FIXED_COLUMNS: [&str; 4] = ["method", "hold_out", "mean", "std"];

impl ResultTable {
    pub fn new(seeds: Vec<u64>) -> Self {
        Self {
            seeds,
            rows: Vec::new(),
        }
    }

    /// Group finished cells by (hold-out, method) in first-seen order.
    pub fn from_cells(cells: &[CellResult], seeds: &[u64], domain_names: &[String]) -> Self {
        let mut keys: Vec<(usize, Method)> = Vec::new();
        for c in cells {
            if !keys.contains(&(c.hold_out, c.method)) {
                keys.push((c.hold_out, c.method));
            }
        }
        let rows = keys
            .into_iter()
            .map(|(h, m)| {
                let per_seed = seeds
                    .iter()
                    .map(|s| {
                        cells
                            .iter()
                            .find(|c| c.hold_out == h && c.method == m && c.seed == *s)
                            .map(|c| c.balanced_accuracy)
                    })
                    .collect();
                ResultRow::new(m, domain_names[h].clone(), per_seed)
            })
            .collect();
        Self {
            seeds: seeds.to_vec(),
            rows,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
        header.extend(self.seeds.iter().map(|s| format!("seed_{s}")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.method.to_string(),
                r.hold_out.clone(),
                r.mean.to_string(),
                r.std.to_string(),
            ];
            rec.extend(
                r.per_seed
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < FIXED_COLUMNS.len() || cols[..4] != FIXED_COLUMNS {
            return Err(Error::InvalidParameter(format!(
                "unexpected result header {cols:?}"
            )));
        }
        let seeds = cols[4..]
            .iter()
            .map(|c| {
                c.strip_prefix("seed_")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::InvalidParameter(format!("bad seed column {c:?}")))
            })
            .collect::<Result<Vec<u64>>>()?;
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidParameter(format!("bad number {s:?}")))
        };
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let per_seed = rec
                .iter()
                .skip(4)
                .map(|v| {
                    if v.is_empty() {
                        Ok(None)
                    } else {
                        num(v).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(ResultRow {
                method: rec[0].parse()?,
                hold_out: rec[1].to_string(),
                mean: num(&rec[2])?,
                std: num(&rec[3])?,
                per_seed,
            });
        }
        Ok(Self { seeds, rows })
    }

    /// Aligned table: one row per method, one column per held-out domain
    /// plus the average, each cell as a fraction and a percentage.
    pub fn to_text(&self) -> String {
        let mut domains: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !domains.contains(&r.hold_out.as_str()) {
                domains.push(&r.hold_out);
            }
        }
        // a method listed twice for a domain gets its own line
        let mut lines: Vec<(Method, usize)> = Vec::new();
        let mut cell: Vec<((Method, usize), &str, f64)> = Vec::new();
        for d in &domains {
            let mut seen: Vec<Method> = Vec::new();
            for r in self.rows.iter().filter(|r| r.hold_out == *d) {
                let key = (r.method, seen.iter().filter(|m| **m == r.method).count());
                seen.push(r.method);
                if !lines.contains(&key) {
                    lines.push(key);
                }
                cell.push((key, d, r.mean));
            }
        }
        let fmt = |v: f64| format!("{v:.4} ({:.1}%)", 100.0 * v);
        let mut header = vec!["Method".to_string()];
        header.extend(domains.iter().map(|d| d.to_string()));
        header.push("Average".into());
        let mut table = vec![header];
        for key in &lines {
            let mut row = vec![key.0.to_string()];
            let mut vals = Vec::new();
            for d in &domains {
                match cell.iter().find(|(k, dd, _)| k == key && dd == d) {
                    Some((_, _, v)) => {
                        vals.push(*v);
                        row.push(fmt(*v));
                    }
                    None => row.push("-".into()),
                }
            }
            row.push(fmt(vals.iter().sum::<f64>() / vals.len() as f64));
            table.push(row);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| {
                table
                    .iter()
                    .map(|r| r[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for row in &table {
            let mut line = String::new();
            for (c, v) in row.iter().enumerate() {
                if c > 0 {
                    line.push_str("  ");
                }
                let _ = write!(line, "{v:<w$}", w = widths[c]);
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        let mut t = ResultTable::new(vec![1, 2, 3]);
        t.rows.push(ResultRow::new(
            Method::Baseline,
            "domain0".into(),
            vec![Some(0.7), Some(0.71), Some(0.1 + 0.2)],
        ));
        t.rows.push(ResultRow::new(
            Method::Clear,
            "domain0".into(),
            vec![Some(0.8), None, Some(0.9)],
        ));
        t
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let text = t.to_csv().unwrap();
        assert_eq!(ResultTable::read_csv(text.as_bytes()).unwrap(), t);
        assert!(text.starts_with("method,hold_out,mean,std,seed_1,seed_2,seed_3\n"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let t = ResultTable::new(vec![4, 5]);
        let text = t.to_csv().unwrap();
        assert_eq!(text, "method,hold_out,mean,std,seed_4,seed_5\n");
        assert_eq!(ResultTable::read_csv(text.as_bytes()).unwrap(), t);
    }

    #[test]
    fn mean_is_arithmetic_mean_and_std_is_population() {
        let r = ResultRow::new(Method::Clear, "d".into(), vec![Some(0.6), Some(0.8)]);
        assert!((r.mean - 0.7).abs() < 1e-12);
        assert!((r.std - 0.1).abs() < 1e-12);
        let r = &sample().rows[1];
        assert!((r.mean - 0.85).abs() < 1e-12);
    }

    #[test]
    fn text_table_shape() {
        let text = sample().to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Method"));
        assert!(lines[0].contains("domain0") && lines[0].contains("Average"));
        assert!(lines[2].starts_with("clear") && lines[2].contains("0.8500 (85.0%)"));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(ResultTable::read_csv("a,b\n".as_bytes()).is_err());
        assert!(ResultTable::read_csv("method,hold_out,mean,std,run1\n".as_bytes()).is_err());
        let bad = "method,hold_out,mean,std,seed_1\nclear,d,x,0,0.5\n";
        assert!(ResultTable::read_csv(bad.as_bytes()).is_err());
    }
}

//! CSV persistence of samples and the plain `key = value` config format.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::twice_censored::{Delta, Observation};

fn header_for(d: usize) -> Vec<String> {
    let mut h = vec!["y".to_string()];
    if d == 1 {
        h.push("x".into());
    } else {
        h.extend((1..=d).map(|j| format!("x{j}")));
    }
    h.push("delta".into());
    h
}

fn parse_f64(field: &str, name: &str, line: u64) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column `{name}`: `{field}` is not a number"),
    })
}

/// Reads a headered `y,x,delta` (or `y,x1,..,xd,delta`) file.
pub fn read_sample<R: Read>(reader: R) -> Result<Vec<Observation>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names.len() < 3 || names[0] != "y" || names[names.len() - 1] != "delta" {
        return Err(Error::Schema {
            line: 1,
            message: format!("expected header y,x,delta or y,x1..xd,delta; got {}", names.join(",")),
        });
    }
    let d = names.len() - 2;
    if names != header_for(d) {
        return Err(Error::Schema {
            line: 1,
            message: format!("unexpected covariate columns in header {}", names.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let y = parse_f64(&rec[0], "y", line)?;
        let x = (1..=d)
            .map(|j| parse_f64(&rec[j], names[j], line))
            .collect::<Result<Vec<f64>>>()?;
        let code = rec[d + 1].trim();
        let delta = code
            .parse::<u8>()
            .ok()
            .and_then(Delta::from_code)
            .ok_or_else(|| Error::Schema {
                line,
                message: format!("delta must be 0, 1 or 2; got `{code}`"),
            })?;
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Schema { line, message: "non-finite value".into() });
        }
        out.push(Observation::new(y, x, delta));
    }
    Ok(out)
}

pub fn write_sample<W: Write>(sample: &[Observation], writer: W) -> Result<()> {
    let d = sample.first().map_or(1, |o| o.x.len());
    if sample.iter().any(|o| o.x.len() != d) {
        return Err(Error::InvalidInput("observations have differing covariate dimensions".into()));
    }
    let mut w = csv::Writer::from_writer(writer);
    let to_io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header_for(d)).map_err(to_io)?;
    for o in sample {
        let mut row = vec![o.y.to_string()];
        row.extend(o.x.iter().map(f64::to_string));
        row.push(o.delta.code().to_string());
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_sample(path: impl AsRef<Path>) -> Result<Vec<Observation>> {
    read_sample(File::open(path)?)
}

pub fn save_sample(sample: &[Observation], path: impl AsRef<Path>) -> Result<()> {
    write_sample(sample, File::create(path)?)
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let key = k.trim();
        if key.is_empty() {
            return Err(Error::Parse { line: i as u64 + 1, message: "empty key".into() });
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("duplicate key `{key}` on line {}", i + 1)));
        }
    }
    Ok(map)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_one_row() {
        let s = read_sample("y,x,delta\n1.0,0.3,0\n".as_bytes()).unwrap();
        assert_eq!(s, vec![Observation::scalar(1.0, 0.3, Delta::Uncensored)]);
    }

    #[test]
    fn bad_delta_is_a_schema_error() {
        let err = read_sample("y,x,delta\n1.0,0.3,0\n2.0,0.1,7\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn bad_number_is_a_parse_error() {
        let err = read_sample("y,x,delta\nabc,0.3,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn canonical_round_trip_is_byte_identical() {
        let text = "y,x1,x2,delta\n1.5,0.25,-1,2\n0.1,3,4.125,1\n";
        let s = read_sample(text.as_bytes()).unwrap();
        assert_eq!(s[0].x, vec![0.25, -1.0]);
        let mut buf = Vec::new();
        write_sample(&s, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn config_lines() {
        let m = parse_config("# study\nmodel = 1\n\nn=100 # size\ntaus = 0.25,0.5\n").unwrap();
        assert_eq!(m["model"], "1");
        assert_eq!(m["n"], "100");
        assert_eq!(m["taus"], "0.25,0.5");
        assert!(parse_config("model 1").is_err());
        assert!(parse_config("a=1\na=2").is_err());
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn save_then_load_is_identity(
            rows in prop::collection::vec((-1e6..1e6f64, prop::collection::vec(-1e3..1e3f64, 2), 0u8..3), 0..40),
        ) {
            let sample: Vec<Observation> = rows
                .into_iter()
                .map(|(y, x, d)| Observation::new(y, x, Delta::from_code(d).unwrap()))
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.csv");
            save_sample(&sample, &path).unwrap();
            prop_assert_eq!(load_sample(&path).unwrap(), sample);
        }
    }
}

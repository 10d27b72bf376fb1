//! Per-tick trial logs.
//!
//! A log file is JSON Lines. Line 1 is a header object, every following line is
//! one [`TrialStepRecord`] with fields in declaration order:
//!
//! ```text
//! {"schema_version":1,"task":"reactive","seed":7,"dt_ms":50.0,"num_bins":32,"range_deg":300.0}
//! {"t":0,"angle_deg":150.0,"velocity_deg_s":0.0,"bin":16,"load":31,"prediction":0.0,"tactor_on":false,"fired_rule":"none","joystick_axis":-1.0,"in_contact":false}
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::feedback::{FeedbackMode, FiredRule};
use crate::{Error, Result};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub schema_version: u32,
    pub task: FeedbackMode,
    pub seed: u64,
    pub dt_ms: f64,
    pub num_bins: usize,
    pub range_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialStepRecord {
    pub t: u64,
    pub angle_deg: f64,
    pub velocity_deg_s: f64,
    pub bin: usize,
    pub load: u16,
    pub prediction: f64,
    pub tactor_on: bool,
    pub fired_rule: FiredRule,
    pub joystick_axis: f64,
    pub in_contact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialLog {
    pub header: LogHeader,
    pub records: Vec<TrialStepRecord>,
}

impl TrialLog {
    pub fn new(header: LogHeader) -> Self {
        TrialLog {
            header,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let line = serde_json::to_string(&self.header).expect("header serialises");
        writeln!(out, "{line}")?;
        for r in &self.records {
            let line = serde_json::to_string(r).expect("record serialises");
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.records.len() * 180 + 128);
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Parse a log, reporting the 1-based line of the first problem.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let header = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                serde_json::from_str::<LogHeader>(&line).map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad header: {e}"),
                })?
            }
            None => {
                return Err(Error::Parse {
                    line: 1,
                    message: "empty log".into(),
                })
            }
        };
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(Error::Parse {
                line: 1,
                message: format!("unsupported schema_version {}", header.schema_version),
            });
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrialStepRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Ok(TrialLog { header, records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrialLog {
        let mut log = TrialLog::new(LogHeader {
            schema_version: 1,
            task: FeedbackMode::Reactive,
            seed: 7,
            dt_ms: 50.0,
            num_bins: 32,
            range_deg: 300.0,
        });
        for t in 0..3 {
            log.records.push(TrialStepRecord {
                t,
                angle_deg: 150.0 + 2.25 * t as f64,
                velocity_deg_s: 45.0,
                bin: 16,
                load: 31,
                prediction: 412.5 + 0.1 * t as f64,
                tactor_on: t == 2,
                fired_rule: if t == 2 { FiredRule::Reactive } else { FiredRule::None },
                joystick_axis: 1.0,
                in_contact: false,
            });
        }
        log
    }

    #[test]
    fn round_trips_through_text() {
        let log = sample();
        let bytes = log.to_bytes();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("{\"t\":0,\"angle_deg\":150.0,"));
        let back = TrialLog::read_from(&bytes[..]).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn reports_line_of_bad_record() {
        let text = String::from_utf8(sample().to_bytes()).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "{\"t\":1,\"angle_deg\":";
        let broken = lines.join("\n");
        match TrialLog::read_from(broken.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(TrialLog::read_from(&b""[..]), Err(Error::Parse { line: 1, .. })));
    }
}

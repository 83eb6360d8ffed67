use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::RatingEvent;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetFormat {
    /// `UserID::MovieID::Rating::Timestamp`, ratings on 1..=5.
    MovielensDat,
    /// Header `user,item,value,timestamp`.
    CsvExplicit,
    /// Header `user,item[,value],timestamp` with the value column empty.
    CsvImplicit,
}

impl DatasetFormat {
    pub fn is_implicit(self) -> bool {
        self == DatasetFormat::CsvImplicit
    }
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens-dat" => Ok(DatasetFormat::MovielensDat),
            "csv-explicit" => Ok(DatasetFormat::CsvExplicit),
            "csv-implicit" => Ok(DatasetFormat::CsvImplicit),
            _ => Err(Error::InvalidParam {
                name: "format",
                reason: format!("expected movielens-dat, csv-explicit or csv-implicit, got `{s}`"),
            }),
        }
    }
}

/// Unit of the timestamp column; events always carry integer seconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TimestampUnit {
    #[default]
    Seconds,
    Milliseconds,
}

impl TimestampUnit {
    fn to_seconds(self, raw: i64) -> i64 {
        match self {
            TimestampUnit::Seconds => raw,
            TimestampUnit::Milliseconds => raw.div_euclid(1000),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetDescriptor {
    pub path: PathBuf,
    pub format: DatasetFormat,
    /// CSV field delimiter; ignored for the MovieLens format.
    pub delimiter: u8,
    pub timestamp_unit: TimestampUnit,
}

impl DatasetDescriptor {
    pub fn new(path: impl Into<PathBuf>, format: DatasetFormat) -> Self {
        Self {
            path: path.into(),
            format,
            delimiter: b',',
            timestamp_unit: TimestampUnit::Seconds,
        }
    }
}

pub fn load_dataset(descriptor: &DatasetDescriptor) -> Result<Vec<RatingEvent>> {
    match descriptor.format {
        DatasetFormat::MovielensDat => {
            let mut events = load_movielens(&descriptor.path)?;
            if descriptor.timestamp_unit != TimestampUnit::Seconds {
                for e in &mut events {
                    e.timestamp = descriptor.timestamp_unit.to_seconds(e.timestamp);
                }
            }
            Ok(events)
        }
        _ => load_csv(descriptor),
    }
}

/// Explicit events from a MovieLens `::` file, stably sorted by timestamp.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<Vec<RatingEvent>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            reason,
        };
        let fields: Vec<&str> = line.split("::").collect();
        let [user, item, rating, ts] = fields[..] else {
            return Err(err(format!("expected 4 `::`-separated fields, got {}", fields.len())));
        };
        if user.is_empty() || item.is_empty() {
            return Err(err("empty user or item id".into()));
        }
        let value: f64 = rating
            .parse()
            .map_err(|_| err(format!("bad rating `{rating}`")))?;
        if !(1.0..=5.0).contains(&value) {
            return Err(err(format!("rating {value} outside 1..5")));
        }
        let timestamp: i64 = ts.parse().map_err(|_| err(format!("bad timestamp `{ts}`")))?;
        events.push(RatingEvent::explicit(user, item, value, timestamp));
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(events)
}

/// Events from a headed CSV file, stably sorted by timestamp.
pub fn load_csv(descriptor: &DatasetDescriptor) -> Result<Vec<RatingEvent>> {
    let path = &descriptor.path;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(descriptor.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| Error::Parse {
        path: path.clone(),
        line: 1,
        reason: format!("missing `{name}` column"),
    };
    let user_col = column("user").ok_or_else(|| missing("user"))?;
    let item_col = column("item").ok_or_else(|| missing("item"))?;
    let ts_col = column("timestamp").ok_or_else(|| missing("timestamp"))?;
    let value_col = column("value");
    let implicit = descriptor.format.is_implicit();
    if !implicit && value_col.is_none() {
        return Err(missing("value"));
    }

    let mut events = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |reason: String| Error::Parse {
            path: path.clone(),
            line,
            reason,
        };
        let field = |i: usize| record.get(i).unwrap_or("");
        let (user, item, ts) = (field(user_col), field(item_col), field(ts_col));
        if user.is_empty() || item.is_empty() {
            return Err(err("empty user or item id".into()));
        }
        let raw_ts: i64 = ts.parse().map_err(|_| err(format!("bad timestamp `{ts}`")))?;
        let timestamp = descriptor.timestamp_unit.to_seconds(raw_ts);
        let value = value_col.map(field).unwrap_or("");
        let event = match (implicit, value.is_empty()) {
            (true, true) => RatingEvent::implicit(user, item, timestamp),
            (true, false) => {
                return Err(err(format!(
                    "mode mismatch: implicit dataset has value `{value}`"
                )))
            }
            (false, true) => return Err(err("mode mismatch: explicit row without a value".into())),
            (false, false) => {
                let v: f64 = value
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| err(format!("bad value `{value}`")))?;
                RatingEvent::explicit(user, item, v, timestamp)
            }
        };
        events.push(event);
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(events)
}

/// Writes events with a `user,item,value,timestamp` header; implicit events
/// leave the value empty.
pub fn write_events_csv<W: Write>(events: &[RatingEvent], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user", "item", "value", "timestamp"])?;
    for e in events {
        let value = e.value.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([e.user.as_str(), e.item.as_str(), &value, &e.timestamp.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub impressions: u64,
    pub clicks: u64,
    pub carts: u64,
    pub purchases: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    query_id: String,
    item_id: String,
    impressions: u64,
    clicks: u64,
    carts: u64,
    purchases: u64,
}

/// Event counts per `(query_id, item_id)` pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InteractionLog {
    pub rows: BTreeMap<(String, String), Counts>,
}

impl InteractionLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a row after checking that no event count exceeds impressions.
    pub fn insert(&mut self, query_id: &str, item_id: &str, counts: Counts) -> Result<()> {
        let over = [
            ("clicks", counts.clicks),
            ("carts", counts.carts),
            ("purchases", counts.purchases),
        ]
        .into_iter()
        .find(|(_, n)| *n > counts.impressions);
        if let Some((event, n)) = over {
            return Err(Error::data(
                "interaction log",
                format!(
                    "({query_id}, {item_id}): {event} = {n} exceeds impressions = {}",
                    counts.impressions
                ),
            ));
        }
        let key = (query_id.to_owned(), item_id.to_owned());
        if self.rows.insert(key, counts).is_some() {
            return Err(Error::data(
                "interaction log",
                format!("duplicate row ({query_id}, {item_id})"),
            ));
        }
        Ok(())
    }

    pub fn query_ids(&self) -> BTreeSet<String> {
        self.rows.keys().map(|(q, _)| q.clone()).collect()
    }

    pub fn totals(&self) -> Counts {
        self.rows.values().fold(Counts::default(), |acc, c| Counts {
            impressions: acc.impressions + c.impressions,
            clicks: acc.clicks + c.clicks,
            carts: acc.carts + c.carts,
            purchases: acc.purchases + c.purchases,
        })
    }

    /// CSV with header `query_id,item_id,impressions,clicks,carts,purchases`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut log = Self::new();
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["query_id", "item_id", "impressions", "clicks", "carts", "purchases"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::data(
                "interaction log",
                format!("header must be {}", expected.join(",")),
            ));
        }
        for row in rdr.deserialize() {
            let r: Row = row?;
            log.insert(
                &r.query_id,
                &r.item_id,
                Counts {
                    impressions: r.impressions,
                    clicks: r.clicks,
                    carts: r.carts,
                    purchases: r.purchases,
                },
            )?;
        }
        Ok(log)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for ((q, i), c) in &self.rows {
            wtr.serialize(Row {
                query_id: q.clone(),
                item_id: i.clone(),
                impressions: c.impressions,
                clicks: c.clicks,
                carts: c.carts,
                purchases: c.purchases,
            })?;
        }
        wtr.flush().map_err(|e| Error::io("<interaction log>", e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file)).map_err(|e| match e {
            Error::Data { message, .. } => Error::data(path.display().to_string(), message),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let text = "query_id,item_id,impressions,clicks,carts,purchases\nq1,a,100,5,2,1\nq1,b,10,0,0,0\n";
        let log = InteractionLog::read_csv(text.as_bytes()).unwrap();
        assert_eq!(log.rows.len(), 2);
        let mut out = Vec::new();
        log.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn clicks_above_impressions_rejected() {
        let text = "query_id,item_id,impressions,clicks,carts,purchases\nq1,a,3,5,0,0\n";
        assert!(InteractionLog::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn carts_may_exceed_clicks() {
        let mut log = InteractionLog::new();
        let c = Counts {
            impressions: 10,
            clicks: 1,
            carts: 3,
            purchases: 0,
        };
        assert!(log.insert("q", "i", c).is_ok());
        assert!(log.insert("q", "i", c).is_err());
    }

    #[test]
    fn wrong_header_rejected() {
        let text = "q,i,imp,c,ca,p\nq1,a,3,1,0,0\n";
        assert!(InteractionLog::read_csv(text.as_bytes()).is_err());
    }
}

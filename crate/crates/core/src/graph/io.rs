//! Delimited files for sector membership, supply-chain pairs and edge lists.
//!
//! | file          | columns                                                  |
//! |---------------|----------------------------------------------------------|
//! | membership    | `symbol,sector,industry_group,industry,sub_industry`     |
//! | supply chain  | `supplier_symbol,customer_symbol`                        |
//! | edges         | `src_s,src_t,dst_s,dst_t,relation`                       |
//!
//! Edge rows use symbol and time-slot indices of the node space.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EdgeSet, NodeSpace, SectorMembership};
use crate::error::{Error, Result};
use crate::lob::io::TableFormat;

#[derive(Serialize, Deserialize)]
struct MembershipRecord {
    symbol: String,
    sector: String,
    industry_group: String,
    industry: String,
    sub_industry: String,
}

#[derive(Serialize, Deserialize)]
struct PairRecord {
    supplier_symbol: String,
    customer_symbol: String,
}

#[derive(Serialize)]
struct EdgeRecord<'a> {
    src_s: u32,
    src_t: u32,
    dst_s: u32,
    dst_t: u32,
    relation: &'a str,
}

fn reader(path: &Path, format: TableFormat) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(format.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

fn writer(path: &Path, format: TableFormat) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .delimiter(format.delimiter)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

pub fn read_membership(path: &Path, format: TableFormat) -> Result<SectorMembership> {
    let mut out = SectorMembership::default();
    for rec in reader(path, format)?.deserialize::<MembershipRecord>() {
        let r = rec.map_err(|e| Error::csv(path, e))?;
        let labels = [r.sector, r.industry_group, r.industry, r.sub_industry];
        if out.labels.insert(r.symbol.clone(), labels).is_some() {
            return Err(Error::Data(format!(
                "{}: symbol {} listed twice",
                path.display(),
                r.symbol
            )));
        }
    }
    Ok(out)
}

pub fn write_membership(path: &Path, format: TableFormat, m: &SectorMembership) -> Result<()> {
    let mut w = writer(path, format)?;
    for (symbol, [a, b, c, d]) in &m.labels {
        w.serialize(MembershipRecord {
            symbol: symbol.clone(),
            sector: a.clone(),
            industry_group: b.clone(),
            industry: c.clone(),
            sub_industry: d.clone(),
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_supply_chain(path: &Path, format: TableFormat) -> Result<Vec<(String, String)>> {
    reader(path, format)?
        .deserialize::<PairRecord>()
        .map(|rec| {
            rec.map(|r| (r.supplier_symbol, r.customer_symbol))
                .map_err(|e| Error::csv(path, e))
        })
        .collect()
}

pub fn write_supply_chain(path: &Path, format: TableFormat, pairs: &[(String, String)]) -> Result<()> {
    let mut w = writer(path, format)?;
    for (a, b) in pairs {
        w.serialize(PairRecord {
            supplier_symbol: a.clone(),
            customer_symbol: b.clone(),
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_edges(path: &Path, format: TableFormat, space: &NodeSpace, sets: &[EdgeSet]) -> Result<()> {
    let mut w = writer(path, format)?;
    for set in sets {
        for &(s, d) in &set.edges {
            let (src, dst) = (space.id(s as usize), space.id(d as usize));
            w.serialize(EdgeRecord {
                src_s: src.symbol,
                src_t: src.time,
                dst_s: dst.symbol,
                dst_t: dst.time,
                relation: set.relation.name(),
            })
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sector_edges, Relation};
    use chrono::NaiveDate;

    #[test]
    fn membership_and_pairs_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = SectorMembership::default();
        m.labels.insert("AAA".into(), ["10".into(), "1010".into(), "101010".into(), "10101010".into()]);
        m.labels.insert("BBB".into(), ["20".into(), "2010".into(), "201010".into(), "20101010".into()]);
        let p = dir.path().join("m.csv");
        write_membership(&p, TableFormat::default(), &m).unwrap();
        assert_eq!(read_membership(&p, TableFormat::default()).unwrap(), m);

        let pairs = vec![("AAA".to_string(), "BBB".to_string())];
        let p = dir.path().join("s.tsv");
        let tab = TableFormat { delimiter: b'\t' };
        write_supply_chain(&p, tab, &pairs).unwrap();
        assert_eq!(read_supply_chain(&p, tab).unwrap(), pairs);
    }

    #[test]
    fn edge_export_columns() {
        let dir = tempfile::tempdir().unwrap();
        let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let space = NodeSpace::dense(2, vec![(d, 1800)]);
        let e = sector_edges(&[Some(0), Some(0)], &space).unwrap();
        assert_eq!(e.relation, Relation::Sector);
        let p = dir.path().join("e.csv");
        write_edges(&p, TableFormat::default(), &space, &[e]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text,
            "src_s,src_t,dst_s,dst_t,relation\n1,0,0,0,sector\n0,0,1,0,sector\n"
        );
    }
}

//! Long-format tables for plotting: `fig,x,series,replication,mse`.
//!
//! Input is either a study table written by the simulation runner or a
//! tidy table produced earlier, so reshaping is one row in, one row out.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::harness::simulation::{Figure, FIGURE_HEADER};

pub const TIDY_HEADER: [&str; 5] = ["fig", "x", "series", "replication", "mse"];

#[derive(Debug, Clone, PartialEq)]
pub struct TidyRow {
    pub fig: Figure,
    pub x: f64,
    pub series: String,
    pub replication: usize,
    pub mse: f64,
}

fn number(rec: &csv::StringRecord, c: usize, row: usize, column: &str) -> Result<f64> {
    rec[c].parse().map_err(|_| Error::Parse {
        row,
        column: column.into(),
        message: format!("bad number {:?}", &rec[c]),
    })
}

pub fn read_tidy<R: Read>(input: R, fig: Figure) -> Result<Vec<TidyRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    let study = header == FIGURE_HEADER;
    if !study && header != TIDY_HEADER {
        return Err(Error::Parse {
            row: 0,
            column: header.join(","),
            message: format!(
                "expected columns {} or {}",
                FIGURE_HEADER.join(","),
                TIDY_HEADER.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let parsed = if study {
            TidyRow {
                fig,
                x: number(&rec, 1, row, "x")?,
                series: rec[0].to_string(),
                replication: number(&rec, 4, row, "replication")? as usize,
                mse: number(&rec, 5, row, "mse")?,
            }
        } else {
            let f: Figure = rec[0].parse()?;
            if f != fig {
                return Err(Error::Config(format!(
                    "row {row} belongs to figure {f}, not {fig}"
                )));
            }
            TidyRow {
                fig,
                x: number(&rec, 1, row, "x")?,
                series: rec[2].to_string(),
                replication: number(&rec, 3, row, "replication")? as usize,
                mse: number(&rec, 4, row, "mse")?,
            }
        };
        rows.push(parsed);
    }
    Ok(rows)
}

pub fn write_tidy<W: Write>(rows: &[TidyRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TIDY_HEADER)?;
    for r in rows {
        out.write_record([
            r.fig.id().to_string(),
            r.x.to_string(),
            r.series.clone(),
            r.replication.to_string(),
            r.mse.to_string(),
        ])?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const STUDY: &str = "series,x,method,params,replication,mse\ns*=1,1,HistOfTree,p=1,0,1.5\ns*=1,2,HistOfTree,p=2,0,1.25\n";

    fn reshape(input: &str, fig: Figure) -> Result<String> {
        let rows = read_tidy(input.as_bytes(), fig)?;
        let mut buf = Vec::new();
        write_tidy(&rows, &mut buf)?;
        Ok(String::from_utf8(buf).unwrap())
    }

    #[test]
    fn reshape_is_one_to_one_and_idempotent() {
        let once = reshape(STUDY, Figure::TradeOff).unwrap();
        assert_eq!(once.lines().count(), STUDY.lines().count());
        assert_eq!(reshape(&once, Figure::TradeOff).unwrap(), once);
        assert!(once.starts_with("fig,x,series,replication,mse\ntrade-off,1,s*=1,0,1.5\n"));
    }

    #[test]
    fn schema_and_figure_mismatches_are_rejected() {
        assert!(matches!(
            reshape("a,b\n1,2\n", Figure::TradeOff),
            Err(Error::Parse { .. })
        ));
        let once = reshape(STUDY, Figure::TradeOff).unwrap();
        assert!(reshape(&once, Figure::Parameter).is_err());
        assert_eq!(
            reshape("series,x,method,params,replication,mse\n", Figure::SelectS)
                .unwrap()
                .lines()
                .count(),
            1
        );
    }
}

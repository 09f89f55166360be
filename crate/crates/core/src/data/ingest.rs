//! CSV ingestion: long-format `date,ticker,price` rows into an aligned panel.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use ndarray::Array2;
use serde::Deserialize;

use crate::error::{Error, Result};

use super::PricePanel;

/// Ingestion knobs (room for dialect options; the defaults cover the
/// project's own exports).
#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    /// Accept and skip rows whose price field is empty (explicit gaps).
    pub allow_blank_prices: bool,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    date: String,
    ticker: String,
    price: String,
}

/// Load a long-format price CSV into a panel on the union calendar.
///
/// Fails on malformed rows (with the line number), duplicate (date, ticker)
/// pairs, and non-positive prices.
pub fn load_csv(path: &Path, config: &IngestConfig) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::io(format!("open {}: {e}", path.display())))?;

    // (date, ticker) → price, plus orderings discovered along the way.
    let mut cells: BTreeMap<(NaiveDate, String), f64> = BTreeMap::new();
    let mut dates: BTreeSet<NaiveDate> = BTreeSet::new();
    let mut ticker_order: Vec<String> = Vec::new();
    let mut seen_tickers: BTreeSet<String> = BTreeSet::new();

    for (idx, row) in reader.deserialize::<RawRow>().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row.map_err(|e| Error::validation(format!("line {line}: {e}")))?;
        let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
            .map_err(|e| Error::validation(format!("line {line}: bad date {:?}: {e}", row.date)))?;
        if row.ticker.is_empty() {
            return Err(Error::validation(format!("line {line}: empty ticker")));
        }
        if row.price.is_empty() && config.allow_blank_prices {
            continue;
        }
        let price: f64 = row
            .price
            .parse()
            .map_err(|e| Error::validation(format!("line {line}: bad price {:?}: {e}", row.price)))?;
        if !(price > 0.0) || !price.is_finite() {
            return Err(Error::validation(format!(
                "line {line}: non-positive price {price} for {} on {date}",
                row.ticker
            )));
        }
        let key = (date, row.ticker.clone());
        if cells.contains_key(&key) {
            return Err(Error::validation(format!(
                "line {line}: duplicate entry for {} on {date}",
                row.ticker
            )));
        }
        if seen_tickers.insert(row.ticker.clone()) {
            ticker_order.push(row.ticker.clone());
        }
        dates.insert(date);
        cells.insert(key, price);
    }

    if cells.is_empty() {
        return Err(Error::validation(format!("{}: no rows", path.display())));
    }

    let dates: Vec<NaiveDate> = dates.into_iter().collect();
    let tickers = ticker_order;
    let (t, n) = (dates.len(), tickers.len());
    let mut prices = Array2::<f64>::from_elem((t, n), f64::NAN);
    let mut available = Array2::<bool>::from_elem((t, n), false);
    for (ti, date) in dates.iter().enumerate() {
        for (ni, ticker) in tickers.iter().enumerate() {
            if let Some(&p) = cells.get(&(*date, ticker.clone())) {
                prices[[ti, ni]] = p;
                available[[ti, ni]] = true;
            }
        }
    }

    let panel = PricePanel { dates, tickers, prices, available };
    panel.validate()?;
    Ok(panel)
}

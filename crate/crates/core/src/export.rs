//! CSV writers for the tabular outputs. Subsets are written as `{1,5}`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::forge::TableRow;
use crate::info::InfoReport;
use crate::minors::MinorRecord;
use crate::schur::PairStats;

fn write_rows<W: Write, R: Serialize>(out: W, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct MinorRow {
    mask_bits: u64,
    subset: String,
    value: f64,
}

/// `mask_bits,subset,value`
pub fn write_minors<W: Write>(out: W, rows: &[MinorRecord]) -> Result<()> {
    write_rows(
        out,
        rows.iter().map(|r| MinorRow { mask_bits: r.alpha.bits(), subset: r.alpha.to_string(), value: r.value }),
    )
}

#[derive(Serialize)]
struct HistRow {
    round: usize,
    count: u64,
}

/// `round,count`
pub fn write_histogram<W: Write>(out: W, hist: &BTreeMap<usize, u64>) -> Result<()> {
    write_rows(out, hist.iter().map(|(&round, &count)| HistRow { round, count }))
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    q: u64,
    mi_exact: Option<f64>,
    mi_bound: f64,
    fano_lower: f64,
    all_zero_exact: f64,
}

/// `n,q,mi_exact,mi_bound,fano_lower,all_zero_exact`; `mi_exact` is empty
/// for strategies without a closed form.
pub fn write_info_sweep<W: Write>(out: W, rows: &[InfoReport]) -> Result<()> {
    write_rows(
        out,
        rows.iter().map(|r| SweepRow {
            n: r.n,
            q: r.q,
            mi_exact: r.mi_exact_bits,
            mi_bound: r.mi_upper_bound_bits,
            fano_lower: r.fano_error_lower,
            all_zero_exact: r.all_zero_prob_exact,
        }),
    )
}

#[derive(Serialize)]
struct PairRow {
    alpha: String,
    beta: String,
    overlap: usize,
    n_pp: u64,
    n_pn: u64,
    n_np: u64,
    n_nn: u64,
    mi_bits: f64,
}

/// `alpha,beta,overlap,n_pp,n_pn,n_np,n_nn,mi_bits`
pub fn write_sign_pairs<W: Write>(out: W, rows: &[PairStats]) -> Result<()> {
    write_rows(
        out,
        rows.iter().map(|p| PairRow {
            alpha: p.alpha.to_string(),
            beta: p.beta.to_string(),
            overlap: p.overlap,
            n_pp: p.n_pp,
            n_pn: p.n_pn,
            n_np: p.n_np,
            n_nn: p.n_nn,
            mi_bits: p.mi_bits,
        }),
    )
}

#[derive(Serialize)]
struct FixtureRow {
    row: usize,
    subset: String,
    printed: f64,
    computed: f64,
    pass: bool,
}

/// `row,subset,printed,computed,pass`
pub fn write_fixture_rows<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    write_rows(
        out,
        rows.iter().map(|r| FixtureRow {
            row: r.row,
            subset: r.subset.to_string(),
            printed: r.printed,
            computed: r.computed,
            pass: r.pass,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::SubsetMask;

    #[test]
    fn minor_csv_quotes_subsets() {
        let rows = vec![MinorRecord { alpha: SubsetMask::from_one_based(&[1, 5], 6).unwrap(), value: -0.25 }];
        let mut buf = Vec::new();
        write_minors(&mut buf, &rows).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "mask_bits,subset,value\n17,\"{1,5}\",-0.25\n");
    }

    #[test]
    fn histogram_csv() {
        let hist = BTreeMap::from([(1, 4u64), (3, 2)]);
        let mut buf = Vec::new();
        write_histogram(&mut buf, &hist).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "round,count\n1,4\n3,2\n");
    }
}

//! Output envelope: every document starts with the tool version and the
//! fully resolved configuration.

use std::fmt::Display;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Serialize, Serializer};

use pmsearch_core::forge::ForgeResult;
use pmsearch_core::instance::InstanceFile;
use pmsearch_core::schur::ConditionalSignReport;
use pmsearch_core::{Error, MinorRecord, Regime, SubsetMask, ViolationReport};

use crate::Common;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

pub fn display<T: Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

#[derive(Serialize)]
struct Header<'a, A: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: Config<'a, A>,
}

#[derive(Serialize)]
struct Config<'a, A: Serialize> {
    seed: u64,
    tol: f64,
    format: Format,
    args: &'a A,
}

#[derive(Serialize)]
struct Document<'a, A: Serialize, R: Serialize> {
    header: Header<'a, A>,
    result: &'a R,
}

pub struct Output {
    seed: u64,
    tol: f64,
    format: Format,
    path: Option<PathBuf>,
}

impl Output {
    pub fn new(c: &Common) -> Self {
        Self { seed: c.seed, tol: c.tol, format: c.format, path: c.out.clone() }
    }

    fn header<'a, A: Serialize>(&self, command: &'a str, args: &'a A) -> Header<'a, A> {
        Header {
            tool: "pmsearch",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config: Config { seed: self.seed, tol: self.tol, format: self.format, args },
        }
    }

    fn sink(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    pub fn json<A: Serialize, R: Serialize>(&self, command: &str, args: &A, result: &R) -> Result<(), Error> {
        let doc = Document { header: self.header(command, args), result };
        let mut w = self.sink()?;
        serde_json::to_writer_pretty(&mut w, &doc)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    /// One `#`-prefixed header line with the JSON header, then the table.
    pub fn csv<A: Serialize>(
        &self,
        command: &str,
        args: &A,
        table: impl FnOnce(&mut dyn Write) -> pmsearch_core::Result<()>,
    ) -> Result<(), Error> {
        let mut w = self.sink()?;
        writeln!(w, "# {}", serde_json::to_string(&self.header(command, args))?)?;
        table(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
pub struct ForgeSummary<'a> {
    pub alpha_star: SubsetMask,
    pub f_m: f64,
    pub s: f64,
    pub lambda0: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub witness: SubsetMask,
    pub witness_value: f64,
    pub regime: Regime,
    pub violations: &'a [MinorRecord],
    pub min_minor: MinorRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance_out: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceFile>,
}

impl<'a> ForgeSummary<'a> {
    pub fn new(r: &'a ForgeResult, instance_out: Option<&'a Path>) -> Self {
        let ViolationReport { regime, violations, min_minor, .. } = &r.report;
        Self {
            alpha_star: r.alpha_star,
            f_m: r.f_m,
            s: r.s,
            lambda0: r.lambda0,
            lambda: r.lambda,
            epsilon: r.epsilon,
            witness: r.witness,
            witness_value: r.witness_value,
            regime: *regime,
            violations,
            min_minor: *min_minor,
            instance_out,
            instance: if instance_out.is_none() { Some(r.instance.to_file()) } else { None },
        }
    }
}

#[derive(Serialize)]
pub struct IdentityCheck {
    pub max_rel_error: f64,
    pub samples_used: usize,
}

#[derive(Serialize)]
pub struct SchurOutput<'a> {
    #[serde(flatten)]
    pub report: &'a ConditionalSignReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schur_identity: Option<IdentityCheck>,
}

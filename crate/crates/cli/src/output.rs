// Copyright 2026 dce-rs Contributors
// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Shortest decimal text of `v` after rounding to `digits` significant
/// digits. Plain notation for magnitudes in `[1e-5, 1e15)`, exponent
/// notation otherwise.
pub fn format_number(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let rounded: f64 = format!("{:.*e}", digits - 1, v)
        .parse()
        .expect("formatted float parses");
    let a = rounded.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// A CSV sink that first writes `#`-prefixed metadata lines.
pub struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
    digits: usize,
}

impl CsvOut {
    pub fn create(
        path: Option<&Path>,
        digits: usize,
        meta: &[(String, String)],
        columns: &[&str],
    ) -> io::Result<Self> {
        let mut raw: Box<dyn Write> = match path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(BufWriter::new(io::stdout())),
        };
        for (k, v) in meta {
            writeln!(raw, "# {k}: {v}")?;
        }
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(raw);
        writer.write_record(columns)?;
        Ok(Self { writer, digits })
    }

    pub fn num(&self, v: f64) -> String {
        format_number(v, self.digits)
    }

    pub fn row<I, S>(&mut self, fields: I) -> io::Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

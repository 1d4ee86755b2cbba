//! Plain-text dataset files: one `#` header line, then one sample per line.
//!
//! ```text
//! # D=3 M=5 V=100 perm=edge q_pos=end variant=forward markers=1 bos_eos=1 structured=0 seed=7
//! BOS 12 40 | ... | / 7 93 = 7 ... 93 EOS
//! ```
//!
//! With `structured=S > 0`, samples come in adjacent groups of `S + 1` sharing one graph.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::error::TokenError;
use crate::tokenizer::{
    detokenize, parse_sample, PermMode, QPosition, TargetVariant, TokenizationOptions, TokenizedSample, Vocabulary,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad header: {0}")]
    Header(String),
    #[error("line {line}: {source}")]
    Sample { line: usize, source: TokenError },
    #[error("line {line}: sample disagrees with header ({what})")]
    Mismatch { line: usize, what: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHeader {
    pub num_arms: usize,
    pub arm_len: usize,
    pub vocab_size: usize,
    pub options: TokenizationOptions,
    pub structured: usize,
    pub seed: u64,
}

impl DatasetHeader {
    pub fn to_line(&self) -> String {
        let o = &self.options;
        format!(
            "# D={} M={} V={} perm={} q_pos={} variant={} markers={} bos_eos={} structured={} seed={}",
            self.num_arms,
            self.arm_len,
            self.vocab_size,
            o.perm_mode,
            o.q_position,
            o.target_variant,
            o.edge_marker_count,
            u8::from(o.include_bos_eos),
            self.structured,
            self.seed
        )
    }

    pub fn parse(line: &str) -> Result<Self, DatasetError> {
        let rest = line.strip_prefix('#').ok_or_else(|| DatasetError::Header("missing `#`".into()))?;
        let fields: BTreeMap<&str, &str> = rest
            .split_whitespace()
            .map(|kv| kv.split_once('=').ok_or_else(|| DatasetError::Header(format!("expected key=value, got `{kv}`"))))
            .collect::<Result<_, _>>()?;
        fn get<T: std::str::FromStr>(fields: &BTreeMap<&str, &str>, key: &str) -> Result<T, DatasetError> {
            let raw = fields.get(key).ok_or_else(|| DatasetError::Header(format!("missing `{key}`")))?;
            raw.parse().map_err(|_| DatasetError::Header(format!("bad value for `{key}`: `{raw}`")))
        }
        let bos_eos: u8 = get(&fields, "bos_eos")?;
        let options = TokenizationOptions {
            perm_mode: get::<PermMode>(&fields, "perm")?,
            q_position: get::<QPosition>(&fields, "q_pos")?,
            target_variant: get::<TargetVariant>(&fields, "variant")?,
            edge_marker_count: get(&fields, "markers")?,
            include_bos_eos: bos_eos != 0,
        };
        Ok(Self {
            num_arms: get(&fields, "D")?,
            arm_len: get(&fields, "M")?,
            vocab_size: get(&fields, "V")?,
            options,
            structured: get(&fields, "structured")?,
            seed: get(&fields, "seed")?,
        })
    }
}

pub fn write_dataset<W: Write + ?Sized>(
    out: &mut W,
    header: &DatasetHeader,
    samples: &[TokenizedSample],
) -> Result<(), DatasetError> {
    writeln!(out, "{}", header.to_line())?;
    for sample in samples {
        let line = detokenize(sample).map_err(|source| DatasetError::Sample { line: 0, source })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a dataset and checks every sample against the header.
pub fn read_dataset<R: BufRead>(input: R) -> Result<(DatasetHeader, Vec<TokenizedSample>), DatasetError> {
    let mut lines = input.lines();
    let header = DatasetHeader::parse(&lines.next().ok_or_else(|| DatasetError::Header("empty file".into()))??)?;
    let vocab = Vocabulary::new(header.vocab_size);
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 2;
        let sample = parse_sample(&line, &vocab, header.options.perm_mode)
            .map_err(|source| DatasetError::Sample { line: line_no, source })?;
        let graph = sample.instance.graph();
        if graph.num_arms() != header.num_arms || graph.arm_len() != header.arm_len {
            return Err(DatasetError::Mismatch { line: line_no, what: "graph shape" });
        }
        if sample.options != header.options {
            return Err(DatasetError::Mismatch { line: line_no, what: "tokenization options" });
        }
        samples.push(sample);
    }
    Ok((header, samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let header = DatasetHeader {
            num_arms: 3,
            arm_len: 5,
            vocab_size: 100,
            options: TokenizationOptions { edge_marker_count: 2, q_position: QPosition::Start, ..Default::default() },
            structured: 2,
            seed: 7,
        };
        let line = header.to_line();
        assert_eq!(
            line,
            "# D=3 M=5 V=100 perm=edge q_pos=start variant=forward markers=2 bos_eos=1 structured=2 seed=7"
        );
        assert_eq!(DatasetHeader::parse(&line).unwrap(), header);
        assert!(DatasetHeader::parse("# D=3").is_err());
        assert!(DatasetHeader::parse(&line.replace("perm=edge", "perm=diag")).is_err());
    }

    #[test]
    fn rejects_mismatched_sample() {
        let text = "# D=2 M=2 V=10 perm=edge q_pos=end variant=forward markers=1 bos_eos=1 structured=0 seed=1\n\
                    BOS 4 8 | 4 9 | 4 3 | / 4 8 = 4 8 EOS\n";
        let err = read_dataset(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Mismatch { line: 2, what: "graph shape" }));
    }
}

//! Line protocol between the evaluation harness and an external scorer.
//!
//! The harness sends `##PROTO 1`, which the scorer echoes. Each batch is a
//! run of `head\trelation\ttail` lines closed by `##END_BATCH`; the scorer
//! answers with one decimal score per triple, in order, and flushes.

use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use kgbench_core::metrics::{Scorer, ScorerError};
use kgbench_core::{Schema, TripleKey, Vocabulary};

pub const HANDSHAKE: &str = "##PROTO 1";
pub const END_BATCH: &str = "##END_BATCH";

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("could not start scorer `{command}`: {source}")]
    Spawn { command: String, source: io::Error },
    #[error("scorer did not echo the handshake (got {got:?})")]
    Handshake { got: Option<String> },
    #[error("batch {batch}: scorer exited after {got} of {expected} scores")]
    EarlyExit { batch: u64, got: usize, expected: usize },
    #[error("batch {batch}: no score within {secs} s after {got} of {expected} scores")]
    Timeout { batch: u64, got: usize, expected: usize, secs: f64 },
    #[error("batch {batch}, response line {line}: not a finite number: {text:?}")]
    NotNumeric { batch: u64, line: usize, text: String },
    #[error("batch {batch}: unexpected extra output {text:?} (more scores than triples?)")]
    ExtraOutput { batch: u64, text: String },
    #[error("batch {batch}: {source}")]
    Io { batch: u64, source: io::Error },
    #[error("scorer exited with {0}")]
    ExitStatus(ExitStatus),
}

impl From<ProtocolError> for ScorerError {
    fn from(e: ProtocolError) -> Self {
        ScorerError(e.to_string())
    }
}

/// A scorer subprocess. The child is killed if this value is dropped before
/// [`ExternalScorer::finish`].
pub struct ExternalScorer<'a> {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    lines: Receiver<io::Result<String>>,
    reader: Option<JoinHandle<()>>,
    timeout: Duration,
    schema: &'a Schema,
    vocab: &'a Vocabulary,
    batch: u64,
}

impl<'a> ExternalScorer<'a> {
    /// Starts `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, schema: &'a Schema, vocab: &'a Vocabulary, timeout: Duration) -> Result<Self, ProtocolError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn { command: command.into(), source })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let (tx, lines) = mpsc::channel();
        let reader = thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut scorer =
            ExternalScorer { child, stdin: Some(stdin), lines, reader: Some(reader), timeout, schema, vocab, batch: 0 };
        scorer.handshake()?;
        Ok(scorer)
    }

    fn handshake(&mut self) -> Result<(), ProtocolError> {
        let sent = self.write(|w| writeln!(w, "{HANDSHAKE}"));
        let got = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Some(line),
            _ => None,
        };
        match (sent, got) {
            (Ok(()), Some(line)) if line.trim_end() == HANDSHAKE => Ok(()),
            (_, got) => Err(ProtocolError::Handshake { got }),
        }
    }

    fn write(&mut self, f: impl FnOnce(&mut BufWriter<ChildStdin>) -> io::Result<()>) -> io::Result<()> {
        let w = self.stdin.as_mut().ok_or_else(|| io::Error::from(io::ErrorKind::BrokenPipe))?;
        f(w)?;
        w.flush()
    }

    /// Number of batches sent so far.
    pub fn batches(&self) -> u64 {
        self.batch
    }

    fn send_batch(&mut self, triples: &[TripleKey]) -> io::Result<()> {
        let (schema, vocab) = (self.schema, self.vocab);
        self.write(|w| {
            for k in triples {
                writeln!(w, "{}\t{}\t{}", vocab.label(k.head), schema.name(k.relation), vocab.label(k.tail))?;
            }
            writeln!(w, "{END_BATCH}")
        })
    }

    fn run_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ProtocolError> {
        self.batch += 1;
        let batch = self.batch;
        let expected = triples.len();
        if let Ok(line) = self.lines.try_recv() {
            let text = line.map_err(|source| ProtocolError::Io { batch, source })?;
            return Err(ProtocolError::ExtraOutput { batch: batch - 1, text });
        }
        if self.send_batch(triples).is_err() {
            // a dead scorer shows up as a broken pipe; report it as an exit
            return Err(ProtocolError::EarlyExit { batch, got: 0, expected });
        }
        out.clear();
        out.reserve(expected);
        for got in 0..expected {
            let line = match self.lines.recv_timeout(self.timeout) {
                Ok(Ok(line)) => line,
                Ok(Err(source)) => return Err(ProtocolError::Io { batch, source }),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(ProtocolError::Timeout { batch, got, expected, secs: self.timeout.as_secs_f64() })
                }
                Err(RecvTimeoutError::Disconnected) => return Err(ProtocolError::EarlyExit { batch, got, expected }),
            };
            match line.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => out.push(v),
                _ => return Err(ProtocolError::NotNumeric { batch, line: got + 1, text: line }),
            }
        }
        Ok(())
    }

    /// Closes the scorer's input, checks it printed nothing more and waits
    /// for a clean exit.
    pub fn finish(mut self) -> Result<(), ProtocolError> {
        self.stdin = None;
        let batch = self.batch;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(text)) => return Err(ProtocolError::ExtraOutput { batch, text }),
            Ok(Err(source)) => return Err(ProtocolError::Io { batch, source }),
            Err(RecvTimeoutError::Disconnected) => {}
            Err(RecvTimeoutError::Timeout) => {
                return Err(ProtocolError::Timeout { batch, got: 0, expected: 0, secs: self.timeout.as_secs_f64() })
            }
        }
        let status = self.child.wait().map_err(|source| ProtocolError::Io { batch, source })?;
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
        if status.success() {
            Ok(())
        } else {
            Err(ProtocolError::ExitStatus(status))
        }
    }
}

impl Scorer for ExternalScorer<'_> {
    fn score_batch(&mut self, triples: &[TripleKey], out: &mut Vec<f64>) -> Result<(), ScorerError> {
        if triples.is_empty() {
            out.clear();
            return Ok(());
        }
        self.run_batch(triples, out).map_err(Into::into)
    }
}

impl Drop for ExternalScorer<'_> {
    fn drop(&mut self) {
        self.stdin = None;
        if self.reader.is_some() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

/// Scorer side of the protocol. `score` receives one batch of
/// `(head, relation, tail)` fields and returns one score per triple.
pub fn serve<R, W, F>(input: R, output: W, mut score: F) -> Result<(), String>
where
    R: BufRead,
    W: Write,
    F: FnMut(&[[&str; 3]]) -> Result<Vec<f64>, String>,
{
    let mut output = BufWriter::new(output);
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(line)) if line.trim_end() == HANDSHAKE => {}
        Some(Ok(line)) => return Err(format!("expected {HANDSHAKE:?}, got {line:?}")),
        Some(Err(e)) => return Err(e.to_string()),
        None => return Ok(()),
    }
    writeln!(output, "{HANDSHAKE}").and_then(|_| output.flush()).map_err(|e| e.to_string())?;
    let mut pending: Vec<String> = Vec::new();
    for line in lines {
        let line = line.map_err(|e| e.to_string())?;
        let line = line.trim_end_matches('\r');
        if line != END_BATCH {
            pending.push(line.to_owned());
            continue;
        }
        let mut triples = Vec::with_capacity(pending.len());
        for (i, l) in pending.iter().enumerate() {
            let mut it = l.split('\t');
            match (it.next(), it.next(), it.next(), it.next()) {
                (Some(h), Some(r), Some(t), None) => triples.push([h, r, t]),
                _ => return Err(format!("batch line {}: expected three tab-separated fields", i + 1)),
            }
        }
        let scores = score(&triples)?;
        if scores.len() != triples.len() {
            return Err(format!("scored {} of {} triples", scores.len(), triples.len()));
        }
        for s in scores {
            writeln!(output, "{s}").map_err(|e| e.to_string())?;
        }
        output.flush().map_err(|e| e.to_string())?;
        pending.clear();
    }
    Ok(())
}

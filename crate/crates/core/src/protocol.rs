//! Newline-delimited JSON over a child process's stdin/stdout.
//!
//! Used by the external reasoner, classifier and grader plug-ins: one request
//! object per line in, one reply object per line out.

use serde_json::Value;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("cannot start '{command}': {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error("i/o error talking to plug-in: {0}")]
    Io(#[from] std::io::Error),
    #[error("plug-in closed its output")]
    Closed,
    #[error("malformed reply: {0}")]
    Malformed(String),
}

pub struct JsonLineProcess {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    round_trips: u64,
}

impl JsonLineProcess {
    /// Spawns `argv[0]` with the remaining arguments.
    pub fn spawn(argv: &[String]) -> Result<Self, ProtocolError> {
        let (program, args) = argv.split_first().ok_or_else(|| ProtocolError::Spawn {
            command: String::new(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| ProtocolError::Spawn {
                command: argv.join(" "),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(JsonLineProcess {
            child,
            stdin,
            stdout,
            round_trips: 0,
        })
    }

    pub fn request(&mut self, msg: &Value) -> Result<Value, ProtocolError> {
        let mut line = serde_json::to_string(msg).map_err(|e| ProtocolError::Malformed(e.to_string()))?;
        line.push('\n');
        self.stdin.write_all(line.as_bytes())?;
        self.stdin.flush()?;
        let mut reply = String::new();
        if self.stdout.read_line(&mut reply)? == 0 {
            return Err(ProtocolError::Closed);
        }
        self.round_trips += 1;
        serde_json::from_str(reply.trim_end())
            .map_err(|e| ProtocolError::Malformed(format!("{e}: {}", reply.trim_end())))
    }

    pub fn round_trips(&self) -> u64 {
        self.round_trips
    }
}

impl Drop for JsonLineProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

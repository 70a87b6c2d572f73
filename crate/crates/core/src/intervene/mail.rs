//! Mail delivery sinks.
//!
//! Drafts leave the system through a [`MailSink`]. The file sink writes one
//! message file per draft for inspection and testing; the SMTP sink speaks
//! just enough of the protocol to hand a message to a relay. Receipt ids are
//! content hashes, so redelivering the same draft yields the same id no
//! matter which sink carried it.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::time::Duration;

use base64::Engine;
use thiserror::Error;

use crate::hashing::sha256_hex;

#[derive(Debug, Error)]
pub enum MailError {
    #[error("mail i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("unexpected response during {step}: {response:?}")]
    Protocol { step: &'static str, response: String },
}

/// A fully addressed message ready for a sink.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboundEmail {
    pub student_id: String,
    pub to_address: String,
    pub subject: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryReceipt {
    pub receipt_id: String,
    pub student_id: String,
}

/// Content hash identifying a delivery; stable across sinks and reruns.
pub fn receipt_id(student_id: &str, subject: &str, body: &str) -> String {
    let blob = format!("{student_id}\n{subject}\n{body}");
    sha256_hex(blob.as_bytes())[..16].to_string()
}

pub trait MailSink {
    /// Channel name recorded on intervention records.
    fn name(&self) -> &str;
    fn send(&mut self, email: &OutboundEmail) -> Result<DeliveryReceipt, MailError>;
}

/// Writes each message as `<receipt_id>.txt` in a directory.
pub struct FileSink {
    dir: PathBuf,
}

impl FileSink {
    pub fn new(dir: impl Into<PathBuf>) -> std::io::Result<FileSink> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(FileSink { dir })
    }

    pub fn message_path(&self, receipt_id: &str) -> PathBuf {
        self.dir.join(format!("{receipt_id}.txt"))
    }
}

impl MailSink for FileSink {
    fn name(&self) -> &str {
        "file"
    }

    fn send(&mut self, email: &OutboundEmail) -> Result<DeliveryReceipt, MailError> {
        let id = receipt_id(&email.student_id, &email.subject, &email.body);
        let text = format!(
            "To: {} <{}>\nSubject: {}\n\n{}\n",
            email.student_id, email.to_address, email.subject, email.body
        );
        std::fs::write(self.message_path(&id), text)?;
        Ok(DeliveryReceipt { receipt_id: id, student_id: email.student_id.clone() })
    }
}

#[derive(Debug, Clone)]
pub struct SmtpConfig {
    pub host: String,
    pub port: u16,
    pub helo_domain: String,
    pub from_address: String,
    /// Username and password for AUTH PLAIN; None skips authentication.
    pub credentials: Option<(String, String)>,
    pub io_timeout: Duration,
}

/// Minimal SMTP client: EHLO, optional AUTH PLAIN, one message per send.
pub struct SmtpSink {
    config: SmtpConfig,
}

impl SmtpSink {
    pub fn new(config: SmtpConfig) -> SmtpSink {
        SmtpSink { config }
    }
}

fn read_reply(reader: &mut impl BufRead, step: &'static str) -> Result<(u16, String), MailError> {
    let mut full = String::new();
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line)?;
        if n == 0 {
            return Err(MailError::Protocol { step, response: "connection closed".into() });
        }
        full.push_str(&line);
        let bytes = line.as_bytes();
        // Multiline replies separate code and text with '-' until the last line.
        if bytes.len() >= 4 && bytes[3] == b' ' {
            let code = line[..3]
                .parse::<u16>()
                .map_err(|_| MailError::Protocol { step, response: full.clone() })?;
            return Ok((code, full));
        }
        if bytes.len() < 4 {
            return Err(MailError::Protocol { step, response: full });
        }
    }
}

fn expect_code(
    reader: &mut impl BufRead,
    expected: u16,
    step: &'static str,
) -> Result<(), MailError> {
    let (code, response) = read_reply(reader, step)?;
    if code != expected {
        return Err(MailError::Protocol { step, response });
    }
    Ok(())
}

/// Escape the line-oriented SMTP data terminator.
fn dot_stuff(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    for line in body.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.starts_with('.') {
            out.push('.');
        }
        out.push_str(line);
        out.push_str("\r\n");
    }
    out
}

impl MailSink for SmtpSink {
    fn name(&self) -> &str {
        "smtp"
    }

    fn send(&mut self, email: &OutboundEmail) -> Result<DeliveryReceipt, MailError> {
        let c = &self.config;
        let stream = TcpStream::connect((c.host.as_str(), c.port))?;
        stream.set_read_timeout(Some(c.io_timeout))?;
        stream.set_write_timeout(Some(c.io_timeout))?;
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut writer = stream;

        expect_code(&mut reader, 220, "greeting")?;
        write!(writer, "EHLO {}\r\n", c.helo_domain)?;
        expect_code(&mut reader, 250, "ehlo")?;

        if let Some((user, pass)) = &c.credentials {
            let token = base64::engine::general_purpose::STANDARD
                .encode(format!("\0{user}\0{pass}"));
            write!(writer, "AUTH PLAIN {token}\r\n")?;
            expect_code(&mut reader, 235, "auth")?;
        }

        write!(writer, "MAIL FROM:<{}>\r\n", c.from_address)?;
        expect_code(&mut reader, 250, "mail-from")?;
        write!(writer, "RCPT TO:<{}>\r\n", email.to_address)?;
        expect_code(&mut reader, 250, "rcpt-to")?;
        write!(writer, "DATA\r\n")?;
        expect_code(&mut reader, 354, "data")?;

        write!(
            writer,
            "From: <{}>\r\nTo: <{}>\r\nSubject: {}\r\n\r\n{}.\r\n",
            c.from_address,
            email.to_address,
            email.subject,
            dot_stuff(&email.body)
        )?;
        expect_code(&mut reader, 250, "message")?;
        let _ = write!(writer, "QUIT\r\n");

        Ok(DeliveryReceipt {
            receipt_id: receipt_id(&email.student_id, &email.subject, &email.body),
            student_id: email.student_id.clone(),
        })
    }
}

/// A send that eventually went through, with the attempt count it took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryOutcome {
    pub receipt: DeliveryReceipt,
    pub attempts: usize,
}

/// Send with up to `attempts` tries, doubling `base_delay` between them.
pub fn deliver(
    sink: &mut dyn MailSink,
    email: &OutboundEmail,
    attempts: usize,
    base_delay: Duration,
) -> Result<DeliveryOutcome, MailError> {
    let attempts = attempts.max(1);
    let mut delay = base_delay;
    for attempt in 1..=attempts {
        match sink.send(email) {
            Ok(receipt) => return Ok(DeliveryOutcome { receipt, attempts: attempt }),
            Err(err) if attempt == attempts => return Err(err),
            Err(_) => {
                std::thread::sleep(delay);
                delay *= 2;
            }
        }
    }
    unreachable!("loop returns on the final attempt");
}

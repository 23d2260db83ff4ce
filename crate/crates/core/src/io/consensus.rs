use std::net::Ipv4Addr;

use base64::engine::general_purpose::STANDARD_NO_PAD;
use base64::Engine;
use chrono::NaiveDateTime;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Consensus, Fingerprint, Flags, Nickname, PreservedLines, Relay};

/// Timestamp format used throughout network-status documents.
pub const TIME_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// A stand-in descriptor digest for relays that have no real descriptor,
/// derived from the identity so that it is stable and distinct per relay.
pub fn digest_for(fingerprint: &Fingerprint) -> String {
    let hash = Sha256::digest(fingerprint.as_bytes());
    STANDARD_NO_PAD.encode(&hash[..20])
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn is_footer_start(line: &str) -> bool {
    line == "directory-footer" || line.starts_with("directory-signature ")
}

fn decode_identity(text: &str, line: usize) -> Result<Fingerprint> {
    let bytes = STANDARD_NO_PAD
        .decode(text.trim_end_matches('='))
        .map_err(|e| parse_err(line, format!("bad identity {text:?}: {e}")))?;
    let bytes: [u8; 20] =
        bytes.try_into().map_err(|_| parse_err(line, format!("identity {text:?} is not 20 bytes")))?;
    Ok(Fingerprint::from_bytes(bytes))
}

fn parse_r_line(args: &[&str], line: usize) -> Result<Relay> {
    let [nick, identity, digest, date, time, ip, or_port, dir_port] = args else {
        return Err(parse_err(line, format!("r line needs 8 fields, found {}", args.len())));
    };
    let nickname = Nickname::new(*nick).map_err(|e| parse_err(line, e))?;
    let fingerprint = decode_identity(identity, line)?;
    let published = NaiveDateTime::parse_from_str(&format!("{date} {time}"), TIME_FORMAT)
        .map_err(|e| parse_err(line, format!("bad publication time: {e}")))?;
    let address: Ipv4Addr = ip.parse().map_err(|_| parse_err(line, format!("bad IPv4 address {ip:?}")))?;
    let port = |p: &str| p.parse::<u16>().map_err(|_| parse_err(line, format!("bad port {p:?}")));
    Ok(Relay {
        nickname,
        fingerprint,
        descriptor_digest: digest.to_string(),
        published,
        address,
        or_port: port(or_port)?,
        dir_port: port(dir_port)?,
        flags: Flags::new(),
        weight: 0,
        weight_extra: Vec::new(),
        preserved: PreservedLines::default(),
        asn: None,
    })
}

/// A relay while its `s` and `w` lines are still being collected.
struct Pending {
    relay: Relay,
    line: usize,
    seen_s: bool,
    seen_w: bool,
}

impl Pending {
    fn finish(self) -> Result<Relay> {
        let missing = if !self.seen_s {
            Some("s")
        } else if !self.seen_w {
            Some("w")
        } else {
            None
        };
        match missing {
            Some(kw) => Err(Error::Relay {
                relay: format!("{} (line {})", self.relay.nickname, self.line),
                message: format!("missing {kw} line"),
            }),
            None => Ok(self.relay),
        }
    }

    fn name(&self) -> String {
        format!("{} (line {})", self.relay.nickname, self.line)
    }

    fn apply(&mut self, keyword: &str, args: &[&str], raw: &str, line: usize) -> Result<()> {
        match keyword {
            "s" => {
                if self.seen_s {
                    return Err(parse_err(line, "second s line for relay"));
                }
                self.seen_s = true;
                self.relay.flags = args.iter().copied().collect();
            }
            "w" => {
                if self.seen_w {
                    return Err(parse_err(line, "second w line for relay"));
                }
                self.seen_w = true;
                let mut weight = None;
                for arg in args {
                    match arg.strip_prefix("Bandwidth=") {
                        Some(value) if weight.is_none() => {
                            weight = Some(value.parse::<u64>().map_err(|_| Error::Relay {
                                relay: self.name(),
                                message: format!("bad Bandwidth value {value:?}"),
                            })?);
                        }
                        _ => self.relay.weight_extra.push(arg.to_string()),
                    }
                }
                self.relay.weight = weight.ok_or_else(|| Error::Relay {
                    relay: self.name(),
                    message: "w line has no Bandwidth".to_string(),
                })?;
            }
            _ => {
                let slot = if self.seen_w {
                    &mut self.relay.preserved.after_w
                } else if self.seen_s {
                    &mut self.relay.preserved.after_s
                } else {
                    &mut self.relay.preserved.after_r
                };
                slot.push(raw.to_string());
            }
        }
        Ok(())
    }
}

/// Parses a full-flavor v3 network-status consensus.
///
/// Lines that are not interpreted are kept so that [`serialize_consensus`]
/// can reproduce them: header and footer lines on the [`Consensus`], and
/// relay-level lines such as `a`, `v`, `pr` and `p` on their relay.
pub fn parse_consensus(text: &str) -> Result<Consensus> {
    let mut preamble = Vec::new();
    let mut footer = Vec::new();
    let mut relays = Vec::new();
    let mut pending: Option<Pending> = None;
    let mut in_footer = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        if in_footer {
            footer.push(raw.to_string());
            continue;
        }
        if is_footer_start(raw) {
            if let Some(p) = pending.take() {
                relays.push(p.finish()?);
            }
            in_footer = true;
            footer.push(raw.to_string());
            continue;
        }
        let mut tokens = raw.split_ascii_whitespace();
        let keyword = tokens.next().unwrap_or("");
        let args: Vec<&str> = tokens.collect();
        if keyword == "r" {
            if let Some(p) = pending.take() {
                relays.push(p.finish()?);
            }
            pending =
                Some(Pending { relay: parse_r_line(&args, line_no)?, line: line_no, seen_s: false, seen_w: false });
            continue;
        }
        match pending.as_mut() {
            Some(p) => p.apply(keyword, &args, raw, line_no)?,
            None => preamble.push(raw.to_string()),
        }
    }
    if let Some(p) = pending.take() {
        relays.push(p.finish()?);
    }

    let valid_after = preamble
        .iter()
        .find_map(|l| l.strip_prefix("valid-after "))
        .ok_or_else(|| Error::MalformedDocument("missing valid-after".to_string()))?;
    let valid_after = NaiveDateTime::parse_from_str(valid_after.trim(), TIME_FORMAT)
        .map_err(|e| Error::MalformedDocument(format!("bad valid-after {valid_after:?}: {e}")))?;

    let consensus = Consensus { valid_after, relays, preamble, footer };
    consensus.check_unique_fingerprints()?;
    Ok(consensus)
}

fn check_preserved(relay: &Relay) -> Result<()> {
    let lines = relay.preserved.after_r.iter().chain(&relay.preserved.after_s).chain(&relay.preserved.after_w);
    for line in lines {
        let keyword = line.split_ascii_whitespace().next().unwrap_or("");
        if line.contains('\n') || matches!(keyword, "r" | "s" | "w") || is_footer_start(line) {
            return Err(Error::Relay {
                relay: relay.fingerprint.to_string(),
                message: format!("preserved line {line:?} would corrupt the document"),
            });
        }
    }
    if relay.weight_extra.iter().any(|a| a.starts_with("Bandwidth=") || a.contains(char::is_whitespace)) {
        return Err(Error::Relay {
            relay: relay.fingerprint.to_string(),
            message: "invalid extra w line argument".to_string(),
        });
    }
    Ok(())
}

/// Writes a consensus back out as a network-status document.
///
/// The `valid-after` header line is regenerated from the model and relays
/// are emitted in ascending fingerprint order. Signatures in the footer are
/// copied as-is and will no longer verify.
pub fn serialize_consensus(consensus: &Consensus) -> Result<String> {
    consensus.check_unique_fingerprints()?;
    let mut relays: Vec<&Relay> = consensus.relays.iter().collect();
    relays.sort_by_key(|r| r.fingerprint);

    let mut out = String::new();
    let valid_after = format!("valid-after {}", consensus.valid_after.format(TIME_FORMAT));
    let mut wrote_valid_after = false;
    for line in &consensus.preamble {
        if line.starts_with("valid-after ") && !wrote_valid_after {
            out.push_str(&valid_after);
            wrote_valid_after = true;
        } else {
            out.push_str(line);
        }
        out.push('\n');
    }
    if !wrote_valid_after {
        out.push_str(&valid_after);
        out.push('\n');
    }

    for relay in relays {
        check_preserved(relay)?;
        out.push_str(&format!(
            "r {} {} {} {} {} {} {}\n",
            relay.nickname,
            STANDARD_NO_PAD.encode(relay.fingerprint.as_bytes()),
            relay.descriptor_digest,
            relay.published.format(TIME_FORMAT),
            relay.address,
            relay.or_port,
            relay.dir_port,
        ));
        for line in &relay.preserved.after_r {
            out.push_str(line);
            out.push('\n');
        }
        out.push('s');
        for flag in relay.flags.iter() {
            out.push(' ');
            out.push_str(flag);
        }
        out.push('\n');
        for line in &relay.preserved.after_s {
            out.push_str(line);
            out.push('\n');
        }
        out.push_str(&format!("w Bandwidth={}", relay.weight));
        for arg in &relay.weight_extra {
            out.push(' ');
            out.push_str(arg);
        }
        out.push('\n');
        for line in &relay.preserved.after_w {
            out.push_str(line);
            out.push('\n');
        }
    }

    for line in &consensus.footer {
        out.push_str(line);
        out.push('\n');
    }
    Ok(out)
}

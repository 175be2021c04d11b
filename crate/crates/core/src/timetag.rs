//! Time-ordered detector clicks and their CSV form (`channel,t_ns`).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Channel(pub u8);

impl Channel {
    /// Heralding detector D1.
    pub const TRIGGER: Channel = Channel(1);
    /// Signal detector before any beam splitter.
    pub const SIGNAL: Channel = Channel(2);
    /// HBT output ports D2 and D3.
    pub const HBT_A: Channel = Channel(3);
    pub const HBT_B: Channel = Channel(4);

    pub const STANDARD: [Channel; 4] = [Channel::TRIGGER, Channel::SIGNAL, Channel::HBT_A, Channel::HBT_B];
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub t_ns: i64,
    pub channel: Channel,
}

impl Tag {
    pub fn new(channel: Channel, t_ns: i64) -> Self {
        Tag { t_ns, channel }
    }
}

/// Clicks sorted by `(t_ns, channel)`, plus the set of channels the stream
/// is declared to carry (a declared channel may have no clicks).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TimeTagStream {
    tags: Vec<Tag>,
    channels: BTreeSet<Channel>,
}

impl TimeTagStream {
    pub fn new(channels: impl IntoIterator<Item = Channel>) -> Self {
        TimeTagStream { tags: Vec::new(), channels: channels.into_iter().collect() }
    }

    /// Sorts `tags` into canonical order. Channels of the tags are declared
    /// automatically in addition to `channels`.
    pub fn from_tags(mut tags: Vec<Tag>, channels: impl IntoIterator<Item = Channel>) -> Self {
        tags.sort_unstable();
        let mut declared: BTreeSet<Channel> = channels.into_iter().collect();
        declared.extend(tags.iter().map(|t| t.channel));
        TimeTagStream { tags, channels: declared }
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn into_tags(self) -> Vec<Tag> {
        self.tags
    }

    pub fn channels(&self) -> &BTreeSet<Channel> {
        &self.channels
    }

    pub fn declare(&mut self, ch: Channel) {
        self.channels.insert(ch);
    }

    pub fn has_channel(&self, ch: Channel) -> bool {
        self.channels.contains(&ch)
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn count(&self, ch: Channel) -> u64 {
        self.tags.iter().filter(|t| t.channel == ch).count() as u64
    }

    /// Sorted click times of one channel.
    pub fn times(&self, ch: Channel) -> Vec<i64> {
        self.tags.iter().filter(|t| t.channel == ch).map(|t| t.t_ns).collect()
    }

    /// `(first, last)` click time.
    pub fn span(&self) -> Option<(i64, i64)> {
        Some((self.tags.first()?.t_ns, self.tags.last()?.t_ns))
    }

    pub fn is_sorted(&self) -> bool {
        self.tags.windows(2).all(|w| w[0] <= w[1])
    }

    /// Adds `offset_ns` to every click.
    pub fn shifted(&self, offset_ns: i64) -> TimeTagStream {
        TimeTagStream {
            tags: self.tags.iter().map(|t| Tag::new(t.channel, t.t_ns + offset_ns)).collect(),
            channels: self.channels.clone(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 + self.tags.len() * 14);
        out.push_str("channel,t_ns\n");
        for t in &self.tags {
            use fmt::Write as _;
            let _ = writeln!(out, "{},{}", t.channel.0, t.t_ns);
        }
        out
    }

    /// Parses the CSV form. Rows must already be time-ordered; an
    /// out-of-order row is reported, never silently sorted. The declared
    /// channel set is the standard detector set plus every channel seen.
    pub fn from_csv(text: &str) -> Result<TimeTagStream> {
        let mut lines = text.lines().enumerate();
        let mut tags = Vec::new();
        match lines.next() {
            None => return Ok(TimeTagStream::new(Channel::STANDARD)),
            Some((_, header)) if header.trim() == "channel,t_ns" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected header `channel,t_ns`, found `{}`", header.trim()),
                })
            }
        }
        let mut last: Option<i64> = None;
        for (idx, raw) in lines {
            let line = idx + 1;
            let row = raw.trim();
            if row.is_empty() {
                continue;
            }
            let bad = |what: &str| Error::Parse { line, message: format!("row {}: {what}: `{row}`", line - 1) };
            let (ch, t) = row.split_once(',').ok_or_else(|| bad("expected two fields"))?;
            let ch: u8 = ch.trim().parse().map_err(|_| bad("channel is not an integer in 0..=255"))?;
            let t: i64 = t.trim().parse().map_err(|_| bad("t_ns is not a 64-bit integer"))?;
            if last.is_some_and(|prev| t < prev) {
                return Err(Error::SortRequired { line });
            }
            last = Some(t);
            tags.push(Tag::new(Channel(ch), t));
        }
        // Equal timestamps may arrive in any channel order.
        tags.sort();
        Ok(TimeTagStream::from_tags(tags, Channel::STANDARD))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rejects_malformed_row_with_line() {
        let text = "channel,t_ns\n1,10\n2,abc\n";
        match TimeTagStream::from_csv(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("row 2"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_unsorted() {
        let text = "channel,t_ns\n1,10\n2,5\n";
        assert!(matches!(TimeTagStream::from_csv(text), Err(Error::SortRequired { line: 3 })));
    }

    #[test]
    fn csv_empty_and_header_only() {
        assert!(TimeTagStream::from_csv("").unwrap().is_empty());
        let s = TimeTagStream::from_csv("channel,t_ns\n").unwrap();
        assert!(s.is_empty());
        assert!(s.has_channel(Channel::TRIGGER));
        assert!(TimeTagStream::from_csv("chan,t\n1,2\n").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = TimeTagStream::from_tags(
            vec![Tag::new(Channel(2), 5), Tag::new(Channel(1), 5), Tag::new(Channel(1), -3)],
            [Channel::TRIGGER, Channel::SIGNAL],
        );
        let back = TimeTagStream::from_csv(&s.to_csv()).unwrap();
        assert_eq!(back.tags(), s.tags());
    }
}

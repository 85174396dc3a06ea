//! Lexical analysis of shell command text.
//!
//! The tokenizer models POSIX single and double quoting for a deliberately
//! small subset of the shell grammar: simple commands joined by `;`, `&&`,
//! `||`, `|`, `&` and newlines, with leading `NAME=value` assignments and
//! plain redirections. Anything whose runtime interpretation cannot be read
//! off the text (substitutions, line continuations, here-docs, arithmetic,
//! brace expansion, compound commands) becomes an [`AnalysisFailure`]
//! rather than a best-effort chain.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Variables that change which code a dynamically linked program loads or
/// how the shell resolves and splits words.
pub const DEFAULT_DANGEROUS_ENV_VARS: &[&str] = &[
    "LD_PRELOAD",
    "LD_LIBRARY_PATH",
    "DYLD_INSERT_LIBRARIES",
    "PATH",
    "IFS",
];

/// Characters a backslash escapes inside double quotes. Newline and
/// carriage return are intentionally absent: backslash-newline is a line
/// continuation, not an escape.
pub const DOUBLE_QUOTE_ESCAPES: &[char] = &['\\', '"', '$', '`'];

const RESERVED_WORDS: &[&str] = &[
    "if", "then", "else", "elif", "fi", "for", "while", "until", "do", "done", "case", "esac",
    "function", "select", "coproc", "time", "!", "{", "}", "[[", "]]",
];

/// The exact command text submitted for execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawCommand {
    text: String,
}

impl RawCommand {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.trim_matches(|c: char| c.is_ascii_whitespace()).is_empty() {
            return Err(Error::EmptyCommand);
        }
        Ok(Self { text })
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Redirection {
    /// Explicit file descriptor prefix, as in `2>`.
    pub fd: Option<u32>,
    pub operator: String,
    pub target: String,
}

/// One command word with its prefix assignments and redirections, after
/// quote removal.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SimpleCommand {
    pub argv: Vec<String>,
    pub env_assignments: Vec<(String, String)>,
    pub redirections: Vec<Redirection>,
    /// Some word still contains `$NAME`, `${...}` or a leading `~`, kept
    /// verbatim.
    pub has_parameter_expansion: bool,
    /// Some argv word contains an unquoted `*`, `?` or `[`.
    pub has_unquoted_glob: bool,
}

impl SimpleCommand {
    /// Builds a command from an explicit argument vector. No shell
    /// semantics apply, so no expansion flags are ever set.
    pub fn from_argv<I, S>(argv: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
        if argv.is_empty() {
            return Err(Error::Usage("argv must not be empty".into()));
        }
        Ok(Self {
            argv,
            ..Self::default()
        })
    }

    pub fn program(&self) -> &str {
        &self.argv[0]
    }

    pub fn args(&self) -> &[String] {
        &self.argv[1..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Connector {
    #[serde(rename = ";")]
    Semicolon,
    #[serde(rename = "&&")]
    And,
    #[serde(rename = "||")]
    Or,
    #[serde(rename = "|")]
    Pipe,
    #[serde(rename = "&")]
    Background,
    #[serde(rename = "\n")]
    Newline,
}

impl Connector {
    pub fn as_str(self) -> &'static str {
        match self {
            Connector::Semicolon => ";",
            Connector::And => "&&",
            Connector::Or => "||",
            Connector::Pipe => "|",
            Connector::Background => "&",
            Connector::Newline => "\n",
        }
    }

    fn needs_right_operand(self) -> bool {
        matches!(self, Connector::And | Connector::Or | Connector::Pipe)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    LineContinuation,
    CommandSubstitution,
    ProcessSubstitution,
    UnbalancedQuote,
    DangerousEnvAssignment,
    UnsupportedConstruct,
}

impl FailureReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FailureReason::LineContinuation => "line_continuation",
            FailureReason::CommandSubstitution => "command_substitution",
            FailureReason::ProcessSubstitution => "process_substitution",
            FailureReason::UnbalancedQuote => "unbalanced_quote",
            FailureReason::DangerousEnvAssignment => "dangerous_env_assignment",
            FailureReason::UnsupportedConstruct => "unsupported_construct",
        }
    }
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnalysisFailure {
    pub reason: FailureReason,
    /// Byte offset into the raw text.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CommandAnalysis {
    Chain {
        commands: Vec<SimpleCommand>,
        connectors: Vec<Connector>,
    },
    Failure(AnalysisFailure),
}

impl CommandAnalysis {
    pub fn is_failure(&self) -> bool {
        matches!(self, CommandAnalysis::Failure(_))
    }

    pub fn commands(&self) -> Option<&[SimpleCommand]> {
        match self {
            CommandAnalysis::Chain { commands, .. } => Some(commands),
            CommandAnalysis::Failure(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisPolicy {
    pub dangerous_env_vars: BTreeSet<String>,
}

impl Default for AnalysisPolicy {
    fn default() -> Self {
        Self {
            dangerous_env_vars: DEFAULT_DANGEROUS_ENV_VARS
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// True iff the text contains a backslash followed by LF or CR anywhere,
/// whatever the quoting context.
pub fn has_shell_line_continuation(raw: &RawCommand) -> bool {
    line_continuation_offset(raw.as_str()).is_some()
}

fn line_continuation_offset(text: &str) -> Option<usize> {
    text.as_bytes()
        .windows(2)
        .position(|w| w[0] == b'\\' && (w[1] == b'\n' || w[1] == b'\r'))
}

pub fn analyze(raw: &RawCommand, policy: &AnalysisPolicy) -> CommandAnalysis {
    if let Some(offset) = line_continuation_offset(raw.as_str()) {
        return CommandAnalysis::Failure(AnalysisFailure {
            reason: FailureReason::LineContinuation,
            offset,
        });
    }
    match Tokenizer::new(raw.as_str(), policy).run() {
        Ok((commands, connectors)) => CommandAnalysis::Chain {
            commands,
            connectors,
        },
        Err(failure) => CommandAnalysis::Failure(failure),
    }
}

/// Convenience wrapper that validates the text first.
pub fn analyze_text(text: &str, policy: &AnalysisPolicy) -> Result<CommandAnalysis> {
    Ok(analyze(&RawCommand::new(text)?, policy))
}

type Step<T = ()> = std::result::Result<T, AnalysisFailure>;

fn fail<T>(reason: FailureReason, offset: usize) -> Step<T> {
    Err(AnalysisFailure { reason, offset })
}

#[derive(Debug, Default)]
struct Word {
    text: String,
    start: usize,
    quoted: bool,
    has_expansion: bool,
    has_glob: bool,
    tilde_prefix: bool,
    /// Byte index of the `=` that makes this word an assignment.
    assignment_split: Option<usize>,
    brace_depth: usize,
    brace_has_separator: bool,
}

impl Word {
    fn push_unquoted(&mut self, c: char) {
        if self.text.is_empty() && !self.quoted && c == '~' {
            self.tilde_prefix = true;
        }
        if c == '='
            && self.assignment_split.is_none()
            && !self.quoted
            && is_name(&self.text)
        {
            self.assignment_split = Some(self.text.len());
        }
        self.text.push(c);
    }

    fn push_quoted(&mut self, c: char) {
        self.quoted = true;
        self.text.push(c);
    }

    fn is_io_number(&self) -> bool {
        !self.quoted
            && !self.text.is_empty()
            && self.text.len() <= 4
            && self.text.bytes().all(|b| b.is_ascii_digit())
    }
}

fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c == '_' || c.is_ascii_alphabetic())
        && chars.all(|c| c == '_' || c.is_ascii_alphanumeric())
}

#[derive(Debug, Default)]
struct CommandBuilder {
    words: Vec<Word>,
    redirections: Vec<Redirection>,
    redirect_expansion: bool,
    start: usize,
}

impl CommandBuilder {
    fn is_empty(&self) -> bool {
        self.words.is_empty() && self.redirections.is_empty()
    }
}

struct PendingRedirect {
    fd: Option<u32>,
    operator: &'static str,
    offset: usize,
}

struct Tokenizer<'a> {
    chars: Vec<(usize, char)>,
    len: usize,
    pos: usize,
    policy: &'a AnalysisPolicy,
    word: Option<Word>,
    current: CommandBuilder,
    redirect: Option<PendingRedirect>,
    commands: Vec<SimpleCommand>,
    connectors: Vec<Connector>,
    pending: Option<(Connector, usize)>,
}

impl<'a> Tokenizer<'a> {
    fn new(text: &'a str, policy: &'a AnalysisPolicy) -> Self {
        Self {
            chars: text.char_indices().collect(),
            len: text.len(),
            pos: 0,
            policy,
            word: None,
            current: CommandBuilder::default(),
            redirect: None,
            commands: Vec::new(),
            connectors: Vec::new(),
            pending: None,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.len, |&(o, _)| o)
    }

    fn word(&mut self) -> &mut Word {
        let start = self.offset();
        self.word.get_or_insert_with(|| Word {
            start,
            ..Word::default()
        })
    }

    fn run(mut self) -> Step<(Vec<SimpleCommand>, Vec<Connector>)> {
        while let Some(c) = self.peek(0) {
            let offset = self.offset();
            match c {
                ' ' | '\t' => {
                    self.finish_word()?;
                    self.pos += 1;
                }
                '\n' => {
                    self.pos += 1;
                    self.end_command(Connector::Newline, offset)?;
                }
                '\r' => return fail(FailureReason::UnsupportedConstruct, offset),
                '#' if self.word.is_none() => {
                    while !matches!(self.peek(0), None | Some('\n')) {
                        self.pos += 1;
                    }
                }
                ';' => {
                    if self.peek(1) == Some(';') {
                        return fail(FailureReason::UnsupportedConstruct, offset);
                    }
                    self.pos += 1;
                    self.end_command(Connector::Semicolon, offset)?;
                }
                '&' => match self.peek(1) {
                    Some('&') => {
                        self.pos += 2;
                        self.end_command(Connector::And, offset)?;
                    }
                    Some('>') => return fail(FailureReason::UnsupportedConstruct, offset),
                    _ => {
                        self.pos += 1;
                        self.end_command(Connector::Background, offset)?;
                    }
                },
                '|' => match self.peek(1) {
                    Some('|') => {
                        self.pos += 2;
                        self.end_command(Connector::Or, offset)?;
                    }
                    Some('&') => return fail(FailureReason::UnsupportedConstruct, offset),
                    _ => {
                        self.pos += 1;
                        self.end_command(Connector::Pipe, offset)?;
                    }
                },
                '<' | '>' => self.redirection(c, offset)?,
                '(' | ')' => return fail(FailureReason::UnsupportedConstruct, offset),
                '\\' => {
                    let Some(next) = self.peek(1) else {
                        return fail(FailureReason::UnsupportedConstruct, offset);
                    };
                    self.word().push_quoted(next);
                    self.pos += 2;
                }
                '\'' => self.single_quoted(offset)?,
                '"' => self.double_quoted(offset)?,
                '`' => return fail(FailureReason::CommandSubstitution, offset),
                '$' => self.dollar(false, offset)?,
                '*' | '?' | '[' => {
                    let word = self.word();
                    word.has_glob = true;
                    word.push_unquoted(c);
                    self.pos += 1;
                }
                '{' => {
                    let word = self.word();
                    word.brace_depth += 1;
                    word.push_unquoted(c);
                    self.pos += 1;
                }
                '}' => {
                    let word = self.word();
                    if word.brace_depth > 0 {
                        if word.brace_has_separator {
                            return fail(FailureReason::UnsupportedConstruct, offset);
                        }
                        word.brace_depth -= 1;
                    }
                    word.push_unquoted(c);
                    self.pos += 1;
                }
                ',' => {
                    let word = self.word();
                    if word.brace_depth > 0 {
                        word.brace_has_separator = true;
                    }
                    word.push_unquoted(c);
                    self.pos += 1;
                }
                '.' if self.peek(1) == Some('.') => {
                    let word = self.word();
                    if word.brace_depth > 0 {
                        word.brace_has_separator = true;
                    }
                    word.push_unquoted('.');
                    word.push_unquoted('.');
                    self.pos += 2;
                }
                other => {
                    self.word().push_unquoted(other);
                    self.pos += 1;
                }
            }
        }
        self.finish()
    }

    fn single_quoted(&mut self, open: usize) -> Step {
        self.pos += 1;
        self.word().quoted = true;
        loop {
            match self.peek(0) {
                None => return fail(FailureReason::UnbalancedQuote, open),
                Some('\'') => {
                    self.pos += 1;
                    return Ok(());
                }
                Some(c) => {
                    self.word().push_quoted(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn double_quoted(&mut self, open: usize) -> Step {
        self.pos += 1;
        self.word().quoted = true;
        loop {
            let offset = self.offset();
            match self.peek(0) {
                None => return fail(FailureReason::UnbalancedQuote, open),
                Some('"') => {
                    self.pos += 1;
                    return Ok(());
                }
                Some('\\') => match self.peek(1) {
                    None => return fail(FailureReason::UnbalancedQuote, open),
                    Some(next) if DOUBLE_QUOTE_ESCAPES.contains(&next) => {
                        self.word().push_quoted(next);
                        self.pos += 2;
                    }
                    Some(_) => {
                        self.word().push_quoted('\\');
                        self.pos += 1;
                    }
                },
                Some('`') => return fail(FailureReason::CommandSubstitution, offset),
                Some('$') => self.dollar(true, offset)?,
                Some(c) => {
                    self.word().push_quoted(c);
                    self.pos += 1;
                }
            }
        }
    }

    /// Handles `$` at the current position. Parameter expansions are kept
    /// verbatim and flagged; everything that would run code fails.
    fn dollar(&mut self, in_double: bool, offset: usize) -> Step {
        let push = |word: &mut Word, c: char| {
            if in_double {
                word.push_quoted(c)
            } else {
                word.push_unquoted(c)
            }
        };
        match self.peek(1) {
            Some('(') => {
                if self.peek(2) == Some('(') {
                    fail(FailureReason::UnsupportedConstruct, offset)
                } else {
                    fail(FailureReason::CommandSubstitution, offset)
                }
            }
            Some('{') => {
                let mut end = self.pos + 2;
                loop {
                    match self.chars.get(end).map(|&(_, c)| c) {
                        None => return fail(FailureReason::UnsupportedConstruct, offset),
                        Some('}') => break,
                        Some('$' | '`' | '"' | '\'' | '(' | ')' | '\\' | '{') => {
                            return fail(FailureReason::UnsupportedConstruct, offset)
                        }
                        Some(_) => end += 1,
                    }
                }
                let text: String = self.chars[self.pos..=end].iter().map(|&(_, c)| c).collect();
                let word = self.word();
                word.has_expansion = true;
                word.quoted |= in_double;
                word.text.push_str(&text);
                self.pos = end + 1;
                Ok(())
            }
            Some('\'' | '"') if !in_double => fail(FailureReason::UnsupportedConstruct, offset),
            Some(c) if c == '_' || c.is_ascii_alphabetic() => {
                let mut end = self.pos + 1;
                while matches!(self.chars.get(end), Some(&(_, c)) if c == '_' || c.is_ascii_alphanumeric())
                {
                    end += 1;
                }
                let text: String = self.chars[self.pos..end].iter().map(|&(_, c)| c).collect();
                let word = self.word();
                word.has_expansion = true;
                word.quoted |= in_double;
                word.text.push_str(&text);
                self.pos = end;
                Ok(())
            }
            Some(c) if c.is_ascii_digit() || "@*#?-$!".contains(c) => {
                let word = self.word();
                word.has_expansion = true;
                word.quoted |= in_double;
                word.text.push('$');
                word.text.push(c);
                self.pos += 2;
                Ok(())
            }
            _ => {
                push(self.word(), '$');
                self.pos += 1;
                Ok(())
            }
        }
    }

    fn redirection(&mut self, c: char, offset: usize) -> Step {
        if self.peek(1) == Some('(') {
            return fail(FailureReason::ProcessSubstitution, offset);
        }
        if self.redirect.is_some() {
            return fail(FailureReason::UnsupportedConstruct, offset);
        }
        let fd = match &self.word {
            Some(word) if word.is_io_number() => {
                let fd = word.text.parse().ok();
                self.word = None;
                fd
            }
            _ => {
                self.finish_word()?;
                None
            }
        };
        let (operator, width) = match (c, self.peek(1)) {
            ('<', Some('<')) => return fail(FailureReason::UnsupportedConstruct, offset),
            ('<', Some('&')) => ("<&", 2),
            ('<', Some('>')) => ("<>", 2),
            ('<', _) => ("<", 1),
            ('>', Some('>')) => (">>", 2),
            ('>', Some('&')) => (">&", 2),
            ('>', Some('|')) => (">|", 2),
            _ => (">", 1),
        };
        self.pos += width;
        self.redirect = Some(PendingRedirect {
            fd,
            operator,
            offset,
        });
        Ok(())
    }

    fn finish_word(&mut self) -> Step {
        let Some(word) = self.word.take() else {
            return Ok(());
        };
        if word.brace_depth > 0 && word.brace_has_separator {
            return fail(FailureReason::UnsupportedConstruct, word.start);
        }
        if self.current.is_empty() {
            self.current.start = word.start;
        }
        match self.redirect.take() {
            Some(redirect) => {
                self.current.redirect_expansion |= word.has_expansion || word.has_glob;
                self.current.redirections.push(Redirection {
                    fd: redirect.fd,
                    operator: redirect.operator.to_string(),
                    target: word.text,
                });
            }
            None => self.current.words.push(word),
        }
        Ok(())
    }

    fn end_command(&mut self, connector: Connector, offset: usize) -> Step {
        self.finish_word()?;
        if let Some(redirect) = &self.redirect {
            return fail(FailureReason::UnsupportedConstruct, redirect.offset);
        }
        if self.current.is_empty() {
            // Blank lines, and newlines after `&&`, `||` or `|`, are allowed.
            return if connector == Connector::Newline {
                Ok(())
            } else {
                fail(FailureReason::UnsupportedConstruct, offset)
            };
        }
        let builder = std::mem::take(&mut self.current);
        let command = self.build(builder)?;
        if let Some((previous, _)) = self.pending.take() {
            self.connectors.push(previous);
        }
        self.commands.push(command);
        self.pending = Some((connector, offset));
        Ok(())
    }

    fn finish(mut self) -> Step<(Vec<SimpleCommand>, Vec<Connector>)> {
        self.finish_word()?;
        if let Some(redirect) = &self.redirect {
            return fail(FailureReason::UnsupportedConstruct, redirect.offset);
        }
        if !self.current.is_empty() {
            let builder = std::mem::take(&mut self.current);
            let command = self.build(builder)?;
            if let Some((previous, _)) = self.pending.take() {
                self.connectors.push(previous);
            }
            self.commands.push(command);
        }
        if let Some((connector, offset)) = self.pending {
            if connector.needs_right_operand() {
                return fail(FailureReason::UnsupportedConstruct, offset);
            }
        }
        if self.commands.is_empty() {
            // Only comments and whitespace.
            return fail(FailureReason::UnsupportedConstruct, 0);
        }
        Ok((self.commands, self.connectors))
    }

    fn build(&self, builder: CommandBuilder) -> Step<SimpleCommand> {
        let mut command = SimpleCommand {
            redirections: builder.redirections,
            has_parameter_expansion: builder.redirect_expansion,
            ..SimpleCommand::default()
        };
        let mut words = builder.words.into_iter().peekable();
        while let Some(word) = words.next_if(|w| w.assignment_split.is_some()) {
            let split = word.assignment_split.unwrap_or_default();
            let name = &word.text[..split];
            if self.policy.dangerous_env_vars.contains(name) {
                return fail(FailureReason::DangerousEnvAssignment, word.start);
            }
            command.has_parameter_expansion |= word.has_expansion;
            command
                .env_assignments
                .push((name.to_string(), word.text[split + 1..].to_string()));
        }
        let mut first = true;
        for word in words {
            if first {
                if word.tilde_prefix
                    || (!word.quoted && RESERVED_WORDS.contains(&word.text.as_str()))
                {
                    return fail(FailureReason::UnsupportedConstruct, word.start);
                }
                first = false;
            }
            // a leading unquoted `~` expands to a home directory at runtime
            command.has_parameter_expansion |= word.has_expansion || word.tilde_prefix;
            command.has_unquoted_glob |= word.has_glob;
            command.argv.push(word.text);
        }
        if command.argv.is_empty() {
            return fail(FailureReason::UnsupportedConstruct, builder.start);
        }
        Ok(command)
    }
}

//! `!` command tokenizer and parser.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum CommandError {
    #[error("commands must start with '!'")]
    NotACommand,
    #[error("unterminated quote starting at position {0}")]
    UnterminatedQuote(usize),
    #[error("empty command")]
    Empty,
    #[error("unknown command '{0}'")]
    UnknownCommand(String),
    #[error("unknown subcommand '{sub}' for '{command}'")]
    UnknownSubcommand { command: String, sub: String },
    #[error("'{command}' is missing its {what}")]
    MissingArgument { command: String, what: String },
    #[error("flag '{0}' needs a value")]
    MissingFlagValue(String),
}

/// Splits a command line shell-style: whitespace separates tokens, single or
/// double quotes group, the quotes themselves are dropped. The leading `!` is
/// removed.
pub fn tokenize(text: &str) -> Result<Vec<String>, CommandError> {
    let body = text
        .trim_start()
        .strip_prefix('!')
        .ok_or(CommandError::NotACommand)?;
    let offset = text.len() - body.len();
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut in_token = false;
    let mut quote: Option<(char, usize)> = None;
    for (i, ch) in body.char_indices() {
        match quote {
            Some((q, _)) if ch == q => quote = None,
            Some(_) => cur.push(ch),
            None if ch == '"' || ch == '\'' && !in_token => {
                quote = Some((ch, offset + i));
                in_token = true;
            }
            None if ch.is_whitespace() => {
                if in_token {
                    tokens.push(std::mem::take(&mut cur));
                    in_token = false;
                }
            }
            None => {
                cur.push(ch);
                in_token = true;
            }
        }
    }
    if let Some((_, pos)) = quote {
        return Err(CommandError::UnterminatedQuote(pos));
    }
    if in_token {
        tokens.push(cur);
    }
    Ok(tokens)
}

/// A parsed command.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CommandAst {
    /// Canonical name: attack, cast, action, init, check, save, game, roll, help.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subcommand: Option<String>,
    /// Issued through `!i` / `!init`: the caster is the current combatant.
    #[serde(default)]
    pub init_scoped: bool,
    #[serde(default)]
    pub positional: Vec<String>,
    /// Raw `-t` values in order, duplicates kept.
    #[serde(default)]
    pub targets: Vec<String>,
    /// Valued flags keyed with their dash (`-dc`, `-title`, `-thumb`, `-rr`, `-phrase`, `-p`).
    #[serde(default)]
    pub flags: BTreeMap<String, Vec<String>>,
    /// Bare switches (`adv`, `dis`, `sadv`, `sdis`, `-i`).
    #[serde(default)]
    pub switches: BTreeSet<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl CommandAst {
    pub fn flag(&self, name: &str) -> Option<&str> {
        self.flags.get(name).and_then(|v| v.last()).map(String::as_str)
    }

    pub fn has(&self, switch: &str) -> bool {
        self.switches.contains(switch)
    }

    /// Ability / skill / expression argument.
    pub fn argument(&self) -> Option<&str> {
        self.positional.first().map(String::as_str)
    }
}

const VALUED_FLAGS: [&str; 6] = ["-dc", "-title", "-thumb", "-rr", "-phrase", "-p"];
const SWITCHES: [&str; 5] = ["adv", "dis", "sadv", "sdis", "-i"];

fn canonical_name(raw: &str) -> Option<&'static str> {
    Some(match raw.to_ascii_lowercase().as_str() {
        "a" | "attack" => "attack",
        "cast" => "cast",
        "action" => "action",
        "i" | "init" | "initiative" => "init",
        "c" | "check" => "check",
        "s" | "save" => "save",
        "g" | "game" => "game",
        "r" | "roll" => "roll",
        "help" => "help",
        _ => return None,
    })
}

fn init_subcommand(raw: &str) -> Option<&'static str> {
    Some(match raw.to_ascii_lowercase().as_str() {
        "begin" | "start" => "begin",
        "next" | "n" => "next",
        "join" => "join",
        "end" => "end",
        "cast" => "cast",
        "a" | "attack" => "attack",
        "action" => "action",
        _ => return None,
    })
}

/// Parses tokens (from [`tokenize`]) into a [`CommandAst`]. Unrecognized
/// tokens become warnings rather than errors.
pub fn parse_command<S: AsRef<str>>(tokens: &[S]) -> Result<CommandAst, CommandError> {
    let (head, rest) = tokens.split_first().ok_or(CommandError::Empty)?;
    let head = head.as_ref();
    let name =
        canonical_name(head).ok_or_else(|| CommandError::UnknownCommand(head.to_string()))?;
    let mut ast = CommandAst {
        name: name.to_string(),
        ..Default::default()
    };
    let mut rest: Vec<&str> = rest.iter().map(AsRef::as_ref).collect();

    match name {
        "init" => {
            if rest.is_empty() {
                return Err(CommandError::MissingArgument {
                    command: "init".into(),
                    what: "subcommand".into(),
                });
            }
            let sub_raw = rest.remove(0);
            let sub = init_subcommand(sub_raw).ok_or_else(|| CommandError::UnknownSubcommand {
                command: "init".into(),
                sub: sub_raw.to_string(),
            })?;
            match sub {
                "cast" | "attack" | "action" => {
                    ast.name = sub.to_string();
                    ast.init_scoped = true;
                }
                _ => ast.subcommand = Some(sub.to_string()),
            }
        }
        "game" => {
            if let Some(sub) = rest.first() {
                ast.subcommand = Some(sub.to_ascii_lowercase());
                rest.remove(0);
            } else {
                return Err(CommandError::MissingArgument {
                    command: "game".into(),
                    what: "subcommand".into(),
                });
            }
        }
        "roll" => {
            if rest.is_empty() {
                return Err(CommandError::MissingArgument {
                    command: "roll".into(),
                    what: "dice expression".into(),
                });
            }
            ast.positional = vec![rest.join(" ")];
            return Ok(ast);
        }
        "help" => {
            ast.positional = rest.iter().map(|s| s.to_string()).collect();
            return Ok(ast);
        }
        _ => {}
    }

    let takes_argument = matches!(
        ast.name.as_str(),
        "attack" | "cast" | "action" | "check" | "save" | "join" | "game"
    ) || ast.subcommand.as_deref() == Some("join");
    let max_positional = if takes_argument { 1 } else { 0 };

    let mut iter = rest.into_iter();
    while let Some(tok) = iter.next() {
        let lower = tok.to_ascii_lowercase();
        if lower == "-t" {
            let v = iter
                .next()
                .ok_or_else(|| CommandError::MissingFlagValue("-t".into()))?;
            ast.targets.push(v.to_string());
        } else if VALUED_FLAGS.contains(&lower.as_str()) {
            let v = iter
                .next()
                .ok_or_else(|| CommandError::MissingFlagValue(tok.to_string()))?;
            ast.flags.entry(lower).or_default().push(v.to_string());
        } else if SWITCHES.contains(&lower.as_str()) {
            ast.switches.insert(lower);
        } else if (!tok.starts_with('-') || tok.parse::<i64>().is_ok()) && ast.positional.len() < max_positional {
            ast.positional.push(tok.to_string());
        } else {
            ast.warnings.push(tok.to_string());
        }
    }

    let needs_argument = matches!(ast.name.as_str(), "attack" | "cast" | "action" | "check" | "save");
    if needs_argument && ast.positional.is_empty() {
        let what = match ast.name.as_str() {
            "cast" => "spell name",
            "attack" => "attack name",
            "action" => "action name",
            "check" => "skill",
            _ => "ability",
        };
        return Err(CommandError::MissingArgument {
            command: ast.name.clone(),
            what: what.into(),
        });
    }
    Ok(ast)
}

/// Tokenizes and parses in one step.
pub fn parse_line(text: &str) -> Result<CommandAst, CommandError> {
    parse_command(&tokenize(text)?)
}

use std::fmt;

/// Role of a child within a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nuclearity {
    Nucleus,
    Satellite,
}

impl Nuclearity {
    fn tag(self) -> &'static str {
        match self {
            Nuclearity::Nucleus => "N",
            Nuclearity::Satellite => "S",
        }
    }
}

/// RST constituency tree. Leaves are EDU indices in left-to-right order;
/// internal nodes carry a relation label and at least two children, at
/// least one of which is a nucleus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RstTree {
    Leaf(usize),
    Internal {
        relation: String,
        children: Vec<(Nuclearity, RstTree)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("relation {relation:?} at byte {offset} has no nucleus")]
    NoNucleus { offset: usize, relation: String },

    #[error("relation {relation:?} at byte {offset} has {found} child(ren), needs at least 2")]
    TooFewChildren {
        offset: usize,
        relation: String,
        found: usize,
    },

    #[error("EDU index {found} at byte {offset}, expected {expected}")]
    NonContiguousEdu {
        offset: usize,
        expected: usize,
        found: usize,
    },
}

impl TreeError {
    pub fn offset(&self) -> usize {
        match self {
            TreeError::Syntax { offset, .. }
            | TreeError::NoNucleus { offset, .. }
            | TreeError::TooFewChildren { offset, .. }
            | TreeError::NonContiguousEdu { offset, .. } => *offset,
        }
    }
}

impl RstTree {
    pub fn edu_count(&self) -> usize {
        match self {
            RstTree::Leaf(_) => 1,
            RstTree::Internal { children, .. } => children.iter().map(|(_, c)| c.edu_count()).sum(),
        }
    }

    /// Relation labels of every internal node, pre-order.
    pub fn relations(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_relations(&mut out);
        out
    }

    fn collect_relations<'a>(&'a self, out: &mut Vec<&'a str>) {
        if let RstTree::Internal { relation, children } = self {
            out.push(relation);
            for (_, c) in children {
                c.collect_relations(out);
            }
        }
    }
}

impl fmt::Display for RstTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RstTree::Leaf(i) => write!(f, "(edu {i})"),
            RstTree::Internal { relation, children } => {
                write!(f, "({relation}")?;
                for (nuc, c) in children {
                    write!(f, " ({} {c})", nuc.tag())?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Open,
    Close,
    Atom(&'a str),
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    next_edu: usize,
}

/// Parses the bracketed form:
///
/// ```text
/// node     := leaf | internal
/// leaf     := "(" "edu" INT ")"
/// internal := "(" LABEL child child+ ")"
/// child    := "(" ("N" | "S") node ")"
/// ```
pub fn parse_rst(text: &str) -> Result<RstTree, TreeError> {
    let mut p = Parser {
        src: text,
        pos: 0,
        next_edu: 0,
    };
    let tree = p.node()?;
    let (tok, offset) = p.next();
    if tok != Tok::End {
        return Err(TreeError::Syntax {
            offset,
            message: "trailing input after tree".into(),
        });
    }
    Ok(tree)
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> (Tok<'a>, usize) {
        let save = self.pos;
        let t = self.next();
        self.pos = save;
        t
    }

    fn next(&mut self) -> (Tok<'a>, usize) {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        match rest.chars().next() {
            None => (Tok::End, start),
            Some('(') => {
                self.pos += 1;
                (Tok::Open, start)
            }
            Some(')') => {
                self.pos += 1;
                (Tok::Close, start)
            }
            Some(_) => {
                let len = rest
                    .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
                    .unwrap_or(rest.len());
                self.pos += len;
                (Tok::Atom(&rest[..len]), start)
            }
        }
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<usize, TreeError> {
        let (tok, offset) = self.next();
        if tok == want {
            Ok(offset)
        } else {
            Err(syntax(offset, format!("expected {what}, found {}", describe(&tok))))
        }
    }

    fn node(&mut self) -> Result<RstTree, TreeError> {
        let open = self.expect(Tok::Open, "'('")?;
        let (tok, offset) = self.next();
        let Tok::Atom(head) = tok else {
            return Err(syntax(offset, format!("expected label or 'edu', found {}", describe(&tok))));
        };
        if head == "edu" {
            if let (Tok::Atom(num), num_offset) = self.peek() {
                self.next();
                let found: usize = num
                    .parse()
                    .map_err(|_| syntax(num_offset, format!("invalid EDU index {num:?}")))?;
                if found != self.next_edu {
                    return Err(TreeError::NonContiguousEdu {
                        offset: num_offset,
                        expected: self.next_edu,
                        found,
                    });
                }
                self.next_edu += 1;
                self.expect(Tok::Close, "')'")?;
                return Ok(RstTree::Leaf(found));
            }
        }
        if !valid_label(head) {
            return Err(syntax(offset, format!("invalid relation label {head:?}")));
        }
        let mut children = Vec::new();
        loop {
            match self.peek() {
                (Tok::Open, _) => children.push(self.child()?),
                (Tok::Close, _) => {
                    self.next();
                    break;
                }
                (tok, off) => {
                    return Err(syntax(off, format!("expected child or ')', found {}", describe(&tok))))
                }
            }
        }
        if children.len() < 2 {
            return Err(TreeError::TooFewChildren {
                offset: open,
                relation: head.to_string(),
                found: children.len(),
            });
        }
        if !children.iter().any(|(n, _)| *n == Nuclearity::Nucleus) {
            return Err(TreeError::NoNucleus {
                offset: open,
                relation: head.to_string(),
            });
        }
        Ok(RstTree::Internal {
            relation: head.to_string(),
            children,
        })
    }

    fn child(&mut self) -> Result<(Nuclearity, RstTree), TreeError> {
        self.expect(Tok::Open, "'('")?;
        let (tok, offset) = self.next();
        let nuc = match tok {
            Tok::Atom("N") => Nuclearity::Nucleus,
            Tok::Atom("S") => Nuclearity::Satellite,
            other => {
                return Err(syntax(offset, format!("expected 'N' or 'S', found {}", describe(&other))))
            }
        };
        let node = self.node()?;
        self.expect(Tok::Close, "')'")?;
        Ok((nuc, node))
    }
}

fn valid_label(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn syntax(offset: usize, message: String) -> TreeError {
    TreeError::Syntax { offset, message }
}

fn describe(tok: &Tok<'_>) -> String {
    match tok {
        Tok::Open => "'('".into(),
        Tok::Close => "')'".into(),
        Tok::Atom(a) => format!("{a:?}"),
        Tok::End => "end of input".into(),
    }
}

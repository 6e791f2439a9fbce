use std::fmt;

use chrono::{Duration, NaiveDate};

use crate::corpus::{DocType, Publication};

/// Publication fields a subset query may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Field {
    Year,
    DateInserted,
    JournalTitle,
    DocType,
    Id,
    ResearchOrgs,
    Concept,
}

/// The value type a field compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Int,
    Date,
    Text,
    /// Text restricted to the [`DocType`] names; equality only.
    DocType,
    /// Multi-valued text; `==`/`!=` test membership.
    TextList,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Year,
        Field::DateInserted,
        Field::JournalTitle,
        Field::DocType,
        Field::Id,
        Field::ResearchOrgs,
        Field::Concept,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Year => "year",
            Field::DateInserted => "date_inserted",
            Field::JournalTitle => "journal_title",
            Field::DocType => "doc_type",
            Field::Id => "id",
            Field::ResearchOrgs => "research_orgs",
            Field::Concept => "concept",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn field_type(self) -> FieldType {
        match self {
            Field::Year => FieldType::Int,
            Field::DateInserted => FieldType::Date,
            Field::JournalTitle | Field::Id => FieldType::Text,
            Field::DocType => FieldType::DocType,
            Field::ResearchOrgs | Field::Concept => FieldType::TextList,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub const ALL: [CmpOp; 6] = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    fn test<T: PartialOrd + ?Sized>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Str(String),
    Int(i64),
    Date(NaiveDate),
}

impl Literal {
    fn type_name(&self) -> &'static str {
        match self {
            Literal::Str(_) => "string",
            Literal::Int(_) => "integer",
            Literal::Date(_) => "date",
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write_quoted(f, s),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => write!(f, "{c}")?,
        }
    }
    f.write_str("\"")
}

/// Predicate tree selecting publications.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Compare {
        field: Field,
        op: CmpOp,
        value: Literal,
    },
    In {
        field: Field,
        values: Vec<Literal>,
    },
    /// `field >= today - days`, inclusive.
    LastDays {
        field: Field,
        days: u32,
    },
    Ids(Vec<String>),
}

impl Expr {
    pub fn and(self, rhs: Expr) -> Expr {
        Expr::And(Box::new(self), Box::new(rhs))
    }

    pub fn or(self, rhs: Expr) -> Expr {
        Expr::Or(Box::new(self), Box::new(rhs))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Expr {
        Expr::Not(Box::new(self))
    }

    /// Checks every leaf pairs its field with a literal of the right type.
    pub fn check(&self) -> Result<(), TypeError> {
        match self {
            Expr::Or(l, r) | Expr::And(l, r) => {
                l.check()?;
                r.check()
            }
            Expr::Not(e) => e.check(),
            Expr::Compare { field, op, value } => check_comparison(*field, *op, value),
            Expr::In { field, values } => {
                if values.is_empty() {
                    return Err(TypeError(format!(
                        "`{field} IN ()` needs at least one value"
                    )));
                }
                values
                    .iter()
                    .try_for_each(|v| check_comparison(*field, CmpOp::Eq, v))
            }
            Expr::LastDays { field, .. } => {
                if field.field_type() == FieldType::Date {
                    Ok(())
                } else {
                    Err(TypeError(format!(
                        "last_days needs a date field, `{field}` is not one"
                    )))
                }
            }
            Expr::Ids(ids) => {
                if ids.is_empty() {
                    Err(TypeError("ids() needs at least one id".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Evaluates the predicate. A leaf over a missing optional field is
    /// false, whatever its operator.
    pub fn matches(&self, p: &Publication, today: NaiveDate) -> bool {
        match self {
            Expr::Or(l, r) => l.matches(p, today) || r.matches(p, today),
            Expr::And(l, r) => l.matches(p, today) && r.matches(p, today),
            Expr::Not(e) => !e.matches(p, today),
            Expr::Compare { field, op, value } => compare(p, *field, *op, value),
            Expr::In { field, values } => values.iter().any(|v| compare(p, *field, CmpOp::Eq, v)),
            Expr::LastDays { field, days } => {
                let cutoff = today - Duration::days(i64::from(*days));
                match field {
                    Field::DateInserted => p.date_inserted.is_some_and(|d| d >= cutoff),
                    _ => false,
                }
            }
            Expr::Ids(ids) => ids.contains(&p.id),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Or(..) => 1,
            Expr::And(..) => 2,
            Expr::Not(_) => 3,
            _ => 4,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.fmt_prec(f, 0)?;
            return f.write_str(")");
        }
        match self {
            // Both binary operators are left associative, so a right operand
            // of the same operator needs parentheses.
            Expr::Or(l, r) => {
                l.fmt_prec(f, 1)?;
                f.write_str(" OR ")?;
                r.fmt_prec(f, 2)
            }
            Expr::And(l, r) => {
                l.fmt_prec(f, 2)?;
                f.write_str(" AND ")?;
                r.fmt_prec(f, 3)
            }
            Expr::Not(e) => {
                f.write_str("NOT ")?;
                e.fmt_prec(f, 3)
            }
            Expr::Compare { field, op, value } => write!(f, "{field} {} {value}", op.symbol()),
            Expr::In { field, values } => {
                write!(f, "{field} IN (")?;
                write_list(f, values.iter())?;
                f.write_str(")")
            }
            Expr::LastDays { field, days } => write!(f, "last_days({field}, {days})"),
            Expr::Ids(ids) => {
                f.write_str("ids(")?;
                write_list(f, ids.iter().map(|s| Literal::Str(s.clone())))?;
                f.write_str(")")
            }
        }
    }
}

fn write_list<T: fmt::Display>(
    f: &mut fmt::Formatter<'_>,
    items: impl Iterator<Item = T>,
) -> fmt::Result {
    for (i, item) in items.enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

/// Prints the expression in query syntax with minimal parentheses; the
/// output parses back to an equal tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeError(pub String);

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn check_comparison(field: Field, op: CmpOp, value: &Literal) -> Result<(), TypeError> {
    let ty = field.field_type();
    let ok = matches!(
        (ty, value),
        (FieldType::Int, Literal::Int(_))
            | (FieldType::Date, Literal::Date(_))
            | (FieldType::Text, Literal::Str(_))
            | (FieldType::DocType, Literal::Str(_))
            | (FieldType::TextList, Literal::Str(_))
    );
    if !ok {
        return Err(TypeError(format!(
            "type mismatch: `{field}` cannot be compared with {} {value}",
            value.type_name()
        )));
    }
    if matches!(ty, FieldType::DocType | FieldType::TextList) && !op.is_equality() {
        return Err(TypeError(format!(
            "operator `{}` is not supported on `{field}`; use == or !=",
            op.symbol()
        )));
    }
    if let (FieldType::DocType, Literal::Str(s)) = (ty, value) {
        if !DocType::ALL.iter().any(|d| d.as_str() == s) {
            return Err(TypeError(format!(
                "`{s}` is not a doc_type (expected article, preprint or other)"
            )));
        }
    }
    Ok(())
}

fn compare(p: &Publication, field: Field, op: CmpOp, value: &Literal) -> bool {
    match (field, value) {
        (Field::Year, Literal::Int(v)) => p.year.is_some_and(|y| op.test(&i64::from(y), v)),
        (Field::DateInserted, Literal::Date(v)) => p.date_inserted.is_some_and(|d| op.test(&d, v)),
        (Field::JournalTitle, Literal::Str(v)) => p
            .journal_title
            .as_deref()
            .is_some_and(|t| op.test(t, v.as_str())),
        (Field::Id, Literal::Str(v)) => op.test(p.id.as_str(), v.as_str()),
        (Field::DocType, Literal::Str(v)) => {
            p.doc_type.is_some_and(|d| op.test(d.as_str(), v.as_str()))
        }
        (Field::ResearchOrgs, Literal::Str(v)) => {
            let found = p.research_orgs.iter().any(|o| o.as_str() == v);
            if op == CmpOp::Eq {
                found
            } else {
                !found
            }
        }
        (Field::Concept, Literal::Str(v)) => {
            let found = p.concepts.iter().any(|c| c.concept == *v);
            if op == CmpOp::Eq {
                found
            } else {
                !found
            }
        }
        // ill-typed leaves are rejected before evaluation
        _ => false,
    }
}

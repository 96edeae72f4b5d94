//! Spider hardness levels.
//!
//! Three component counts are taken from the top-level query:
//!
//! * `comp1`: one each for a non-empty `WHERE`, `GROUP BY`, `ORDER BY` and
//!   `LIMIT`, plus one per joined table beyond the first, one per `OR`
//!   connective and one per `LIKE` predicate (join, where and having).
//! * `comp2`: subqueries used as predicate operands in `WHERE`/`HAVING`, plus
//!   one for a set operation.
//! * `others`: one each for more than one aggregated term (counted over
//!   select, where, group by, order by and having), more than one select
//!   term, more than one where predicate and more than one group-by term.
//!
//! | level  | rule |
//! |--------|------|
//! | easy   | comp1 ≤ 1, others = 0, comp2 = 0 |
//! | medium | (others ≤ 2, comp1 ≤ 1, comp2 = 0) or (comp1 ≤ 2, others < 2, comp2 = 0) |
//! | hard   | (others > 2, comp1 ≤ 2, comp2 = 0) or (2 < comp1 ≤ 3, others ≤ 2, comp2 = 0) or (comp1 ≤ 1, others = 0, comp2 ≤ 1) |
//! | extra  | anything else |

use serde::{Deserialize, Serialize};

use super::{ClauseSets, CmpOp, Connector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hardness {
    Easy,
    Medium,
    Hard,
    Extra,
}

impl Hardness {
    pub const ALL: [Hardness; 4] = [Hardness::Easy, Hardness::Medium, Hardness::Hard, Hardness::Extra];

    pub fn as_str(self) -> &'static str {
        match self {
            Hardness::Easy => "easy",
            Hardness::Medium => "medium",
            Hardness::Hard => "hard",
            Hardness::Extra => "extra",
        }
    }
}

impl std::fmt::Display for Hardness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComponentCounts {
    pub comp1: usize,
    pub comp2: usize,
    pub others: usize,
}

impl ComponentCounts {
    pub fn of(q: &ClauseSets) -> Self {
        let preds = || {
            q.from
                .joins
                .iter()
                .chain(&q.where_.predicates)
                .chain(&q.having.predicates)
        };
        let ors = q
            .where_
            .connectors
            .iter()
            .chain(&q.having.connectors)
            .filter(|c| **c == Connector::Or)
            .count();
        let likes = preds().filter(|p| p.op == CmpOp::Like).count();
        let comp1 = usize::from(!q.where_.is_empty())
            + usize::from(!q.group_by.is_empty())
            + usize::from(!q.order_by.is_empty())
            + usize::from(q.limit)
            + q.from.tables.len().saturating_sub(1)
            + ors
            + likes;

        let comp2 = q.nested().len() + usize::from(q.set_op.is_some());

        let aggs = q.select.iter().filter(|e| e.has_agg()).count()
            + q.where_.predicates.iter().filter(|p| p.lhs.has_agg()).count()
            + q.group_by.iter().filter(|e| e.has_agg()).count()
            + q.order_by.iter().filter(|(e, _)| e.has_agg()).count()
            + q.having.predicates.iter().filter(|p| p.lhs.has_agg()).count();
        let others = usize::from(aggs > 1)
            + usize::from(q.select.len() > 1)
            + usize::from(q.where_.predicates.len() > 1)
            + usize::from(q.group_by.len() > 1);

        ComponentCounts { comp1, comp2, others }
    }

    pub fn level(self) -> Hardness {
        let ComponentCounts { comp1, comp2, others } = self;
        if comp1 <= 1 && others == 0 && comp2 == 0 {
            Hardness::Easy
        } else if (others <= 2 && comp1 <= 1 && comp2 == 0) || (comp1 <= 2 && others < 2 && comp2 == 0) {
            Hardness::Medium
        } else if (others > 2 && comp1 <= 2 && comp2 == 0)
            || (2 < comp1 && comp1 <= 3 && others <= 2 && comp2 == 0)
            || (comp1 <= 1 && others == 0 && comp2 <= 1)
        {
            Hardness::Hard
        } else {
            Hardness::Extra
        }
    }
}

pub fn classify_hardness(q: &ClauseSets) -> Hardness {
    ComponentCounts::of(q).level()
}

#[cfg(test)]
mod tests {
    use super::super::parse_sql;
    use super::*;

    fn level(q: &str) -> (Hardness, ComponentCounts) {
        let c = ComponentCounts::of(&parse_sql(q).unwrap());
        (c.level(), c)
    }

    #[test]
    fn simple_select_is_easy() {
        let (h, c) = level("SELECT name FROM singer");
        assert_eq!(c, ComponentCounts { comp1: 0, comp2: 0, others: 0 });
        assert_eq!(h, Hardness::Easy);
    }

    #[test]
    fn one_join_one_predicate_is_medium() {
        let (h, c) = level("SELECT T1.name FROM singer AS T1 JOIN concert AS T2 ON T1.id = T2.sid WHERE T2.year = 2014");
        assert_eq!(c, ComponentCounts { comp1: 2, comp2: 0, others: 0 });
        assert_eq!(h, Hardness::Medium);
    }

    #[test]
    fn nested_plus_set_op_is_extra() {
        let (h, c) = level(
            "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer) UNION SELECT name FROM stadium",
        );
        assert_eq!(c.comp2, 2);
        assert_eq!(h, Hardness::Extra);
    }

    #[test]
    fn single_set_op_is_hard() {
        let (h, _) = level("SELECT name FROM singer INTERSECT SELECT name FROM stadium");
        assert_eq!(h, Hardness::Hard);
    }
}

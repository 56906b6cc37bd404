//! Deterministic compilation of a [`QueryAst`] into SQL over the store schema.

use crate::ast::{HorizonClass, QueryAst, QueryKind, Scope, LONG_HORIZON_MIN, SHORT_HORIZON_MAX};

const SCORE_JOINS: &str = "FROM scores s JOIN runs r ON s.run_id=r.run_id JOIN methods m ON r.method_id=m.method_id \
                           JOIN datasets d ON r.dataset_id=d.dataset_id";

/// Rows returned by breakdown and statistics queries.
const GROUP_LIMIT: usize = 100;

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}

fn dataset_conditions(ast: &QueryAst, out: &mut Vec<String>) {
    match &ast.scope {
        Scope::All => {}
        Scope::Univariate => out.push("d.n_channels=1".into()),
        Scope::Multivariate => out.push("d.n_channels>1".into()),
        Scope::Domain(name) => out.push(format!("d.domain={}", quote(name))),
        Scope::Dataset(name) => out.push(format!("d.dataset_id={}", quote(name))),
    }
    if let Some(f) = &ast.characteristic_filter {
        out.push(format!("d.{}{}{}", f.name, f.direction.symbol(), f.threshold));
    }
}

fn score_conditions(ast: &QueryAst) -> Vec<String> {
    let mut out = vec![format!("s.metric={}", quote(ast.metric.name())), "r.status='ok'".to_string()];
    match ast.horizon_class {
        HorizonClass::Long => out.push(format!("r.horizon>={LONG_HORIZON_MIN}")),
        HorizonClass::Short => out.push(format!("r.horizon<={SHORT_HORIZON_MAX}")),
        HorizonClass::Any => {}
    }
    out
}

fn where_clause(conditions: &[String]) -> String {
    if conditions.is_empty() {
        String::new()
    } else {
        format!(" WHERE {}", conditions.join(" AND "))
    }
}

/// SQL for `ast`. Every metric is an error measure, so rankings are ascending.
pub fn ast_to_sql(ast: &QueryAst) -> String {
    match ast.kind {
        QueryKind::TopK => {
            let mut c = score_conditions(ast);
            dataset_conditions(ast, &mut c);
            format!(
                "SELECT m.name, AVG(s.value) AS v {SCORE_JOINS}{} GROUP BY m.name ORDER BY v ASC LIMIT {}",
                where_clause(&c),
                ast.k
            )
        }
        QueryKind::BestOnDataset => {
            let mut c = score_conditions(ast);
            let Scope::Dataset(name) = &ast.scope else { unreachable!("validated ast") };
            c.push(format!("r.dataset_id={}", quote(name)));
            let from = if let Some(f) = &ast.characteristic_filter {
                c.push(format!("d.{}{}{}", f.name, f.direction.symbol(), f.threshold));
                "FROM scores s JOIN runs r ON s.run_id=r.run_id JOIN datasets d ON r.dataset_id=d.dataset_id"
            } else {
                "FROM scores s JOIN runs r ON s.run_id=r.run_id"
            };
            format!("SELECT r.method_id, s.value {from}{} ORDER BY s.value ASC LIMIT 1", where_clause(&c))
        }
        QueryKind::CompareTwo => {
            let (a, b) = ast.methods.as_ref().expect("validated ast");
            let mut c = score_conditions(ast);
            c.push(format!("m.name IN ({}, {})", quote(a), quote(b)));
            dataset_conditions(ast, &mut c);
            format!(
                "SELECT m.name, AVG(s.value) AS v {SCORE_JOINS}{} GROUP BY m.name ORDER BY v ASC LIMIT 2",
                where_clause(&c)
            )
        }
        QueryKind::HorizonBreakdown => {
            let name = ast.method.as_deref().expect("validated ast");
            let mut c = score_conditions(ast);
            c.push(format!("m.name={}", quote(name)));
            dataset_conditions(ast, &mut c);
            format!(
                "SELECT r.horizon, AVG(s.value) AS v {SCORE_JOINS}{} GROUP BY r.horizon ORDER BY r.horizon ASC LIMIT {GROUP_LIMIT}",
                where_clause(&c)
            )
        }
        QueryKind::CharacteristicStats => {
            let mut c = Vec::new();
            dataset_conditions(ast, &mut c);
            let value = match &ast.characteristic {
                Some(ch) => format!("AVG(d.{ch})"),
                None => "COUNT(*)".to_string(),
            };
            format!(
                "SELECT d.domain, {value} AS v FROM datasets d{} GROUP BY d.domain ORDER BY d.domain ASC LIMIT {GROUP_LIMIT}",
                where_clause(&c)
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{parse_question, TEMPLATES};
    use easytime_store::verify_sql;

    #[test]
    fn top_methods_question_compiles_exactly() {
        let ast = parse_question(TEMPLATES[0]).unwrap();
        assert_eq!(
            ast_to_sql(&ast),
            "SELECT m.name, AVG(s.value) AS v FROM scores s JOIN runs r ON s.run_id=r.run_id JOIN methods m ON \
             r.method_id=m.method_id JOIN datasets d ON r.dataset_id=d.dataset_id WHERE s.metric='mae' AND \
             r.status='ok' AND r.horizon>=96 AND d.n_channels>1 AND d.trend>0.6 GROUP BY m.name ORDER BY v ASC LIMIT 8"
        );
    }

    #[test]
    fn best_on_dataset_is_single_join() {
        let ast = parse_question("best method on dataset ETTh1-like by mae").unwrap();
        let sql = ast_to_sql(&ast);
        assert_eq!(
            sql,
            "SELECT r.method_id, s.value FROM scores s JOIN runs r ON s.run_id=r.run_id WHERE s.metric='mae' AND \
             r.status='ok' AND r.dataset_id='ETTh1-like' ORDER BY s.value ASC LIMIT 1"
        );
    }

    #[test]
    fn quotes_are_escaped() {
        let mut ast = parse_question("top-2 methods on domain x").unwrap();
        ast.scope = Scope::Domain("o'hare".into());
        assert!(ast_to_sql(&ast).contains("d.domain='o''hare'"));
        assert!(verify_sql(&ast_to_sql(&ast)).ok);
    }

    #[test]
    fn templates_verify() {
        for t in TEMPLATES {
            let sql = ast_to_sql(&parse_question(t).unwrap());
            let verdict = verify_sql(&sql);
            assert!(verdict.ok, "{t}: {}", verdict.summary());
            assert!(verdict.notices.is_empty(), "{t}: limit should be explicit");
        }
    }
}

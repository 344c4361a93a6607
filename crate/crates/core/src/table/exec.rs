use std::cmp::Ordering;
use std::collections::HashMap;

use super::sql::{Expr, OrderItem, QueryAst, SelectList};
use super::{LeafType, Segment, TableError, TableSchema, Value};

/// Keeps only rows whose text column contains a keyword
/// (case-insensitive). Applied before projection and aggregation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowFilter {
    pub column: String,
    pub contains: String,
}

impl RowFilter {
    pub fn text_contains(column: &str, keyword: &str) -> Self {
        RowFilter { column: column.to_string(), contains: keyword.to_lowercase() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultSet {
    /// CSV with a header row; nulls are empty fields.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string())).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("values are UTF-8")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.eq_ignore_ascii_case(name))
    }
}

struct Ctx<'a> {
    schema: &'a TableSchema,
    columns: &'a [Segment],
}

impl Ctx<'_> {
    fn resolve(&self, path: &str) -> Result<usize, TableError> {
        self.schema.leaf_index(path).ok_or_else(|| TableError::UnknownColumn(path.to_string()))
    }

    fn check(&self, expr: &Expr) -> Result<LeafType, TableError> {
        match expr {
            Expr::Column(c) => Ok(self.columns[self.resolve(c)?].leaf_type()),
            Expr::Int(_) => Ok(LeafType::Int64),
            Expr::Sum(inner) => match self.check(inner)? {
                LeafType::Int64 => Ok(LeafType::Int64),
                LeafType::Text => Err(TableError::TypeMismatch(format!("SUM over text expression {inner}"))),
            },
            Expr::Add(a, b) => {
                for side in [a, b] {
                    if self.check(side)? == LeafType::Text {
                        return Err(TableError::TypeMismatch(format!("'+' applied to text expression {side}")));
                    }
                }
                Ok(LeafType::Int64)
            }
        }
    }

    fn eval_row(&self, expr: &Expr, row: usize) -> Result<Value, TableError> {
        match expr {
            Expr::Column(c) => Ok(self.columns[self.resolve(c)?].value(row)),
            Expr::Int(v) => Ok(Value::Int(*v)),
            Expr::Add(a, b) => add(self.eval_row(a, row)?, self.eval_row(b, row)?, expr),
            Expr::Sum(_) => Err(TableError::InvalidQuery(format!("aggregate {expr} outside an aggregate query"))),
        }
    }

    fn int_row(&self, expr: &Expr, row: usize) -> Result<Option<i64>, TableError> {
        match expr {
            Expr::Column(c) => Ok(self.columns[self.resolve(c)?].int(row)),
            other => Ok(self.eval_row(other, row)?.as_int()),
        }
    }
}

fn add(a: Value, b: Value, expr: &Expr) -> Result<Value, TableError> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            x.checked_add(y).map(Value::Int).ok_or_else(|| TableError::Overflow(expr.to_string()))
        }
        (Value::Null, _) | (_, Value::Null) => Ok(Value::Null),
        _ => Err(TableError::TypeMismatch(format!("'+' applied to text in {expr}"))),
    }
}

fn compare_keys(a: &[Value], b: &[Value], order: &[OrderItem]) -> Ordering {
    for (i, item) in order.iter().enumerate() {
        let o = a[i].cmp(&b[i]);
        let o = if item.descending { o.reverse() } else { o };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

pub(crate) fn execute(
    ast: &QueryAst,
    schema: &TableSchema,
    columns: &[Segment],
    filter: Option<&RowFilter>,
) -> Result<ResultSet, TableError> {
    let ctx = Ctx { schema, columns };
    let total = columns.first().map_or(0, Segment::len);
    let rows: Vec<usize> = match filter {
        None => (0..total).collect(),
        Some(f) => {
            let seg = &columns[ctx.resolve(&f.column)?];
            let Segment::Text { dict, codes } = seg else {
                return Err(TableError::TypeMismatch(format!("filter column {} is not text", f.column)));
            };
            let needle = f.contains.to_lowercase();
            let hits: Vec<bool> = dict.iter().map(|s| s.to_lowercase().contains(&needle)).collect();
            (0..total).filter(|r| codes[*r] != u32::MAX && hits[codes[*r] as usize]).collect()
        }
    };

    let items = match &ast.select {
        SelectList::Star => {
            let leaves = schema.leaves();
            let out_rows = rows.iter().map(|r| columns.iter().map(|c| c.value(*r)).collect()).collect();
            let mut rs = ResultSet { columns: leaves.into_iter().map(|l| l.path).collect(), rows: out_rows };
            order_plain(&ctx, &mut rs, &rows, &ast.order_by)?;
            truncate(&mut rs, ast.limit);
            return Ok(rs);
        }
        SelectList::Items(items) => items,
    };
    for item in items {
        ctx.check(&item.expr)?;
    }
    let names: Vec<String> = items.iter().map(|i| i.name()).collect();

    if !ast.is_aggregate() {
        let mut out_rows = Vec::with_capacity(rows.len());
        for r in &rows {
            out_rows.push(items.iter().map(|i| ctx.eval_row(&i.expr, *r)).collect::<Result<Vec<_>, _>>()?);
        }
        let mut rs = ResultSet { columns: names, rows: out_rows };
        order_plain(&ctx, &mut rs, &rows, &ast.order_by)?;
        truncate(&mut rs, ast.limit);
        return Ok(rs);
    }

    // Resolve ORDER BY items against output names before treating them as
    // expressions over the groups.
    let mut order_sources = Vec::new();
    for o in &ast.order_by {
        let by_name = match &o.expr {
            Expr::Column(c) => names.iter().position(|n| n.eq_ignore_ascii_case(c)),
            _ => None,
        };
        match by_name {
            Some(i) => order_sources.push(OrderSource::Output(i)),
            None => {
                ctx.check(&o.expr)?;
                for col in o.expr.free_columns() {
                    if !ast.group_by.iter().any(|g| g.eq_ignore_ascii_case(col)) {
                        return Err(TableError::InvalidQuery(format!(
                            "ORDER BY {col} is neither an output column nor a GROUP BY column"
                        )));
                    }
                }
                order_sources.push(OrderSource::Expr(&o.expr));
            }
        }
    }

    let group_cols: Vec<usize> = ast.group_by.iter().map(|g| ctx.resolve(g)).collect::<Result<_, _>>()?;
    let mut aggregates: Vec<&Expr> = Vec::new();
    for e in items.iter().map(|i| &i.expr).chain(order_sources.iter().filter_map(OrderSource::expr)) {
        collect_sums(e, &mut aggregates);
    }

    let mut index: HashMap<Vec<KeyPart>, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    if group_cols.is_empty() {
        groups.push(Group { key: Vec::new(), sums: vec![None; aggregates.len()] });
    }
    let mut scratch = Vec::with_capacity(group_cols.len());
    for &r in &rows {
        let g = if group_cols.is_empty() {
            0
        } else {
            scratch.clear();
            scratch.extend(group_cols.iter().map(|c| key_part(&columns[*c], r)));
            match index.get(scratch.as_slice()) {
                Some(g) => *g,
                None => {
                    let g = groups.len();
                    index.insert(scratch.clone(), g);
                    groups.push(Group {
                        key: group_cols.iter().map(|c| columns[*c].value(r)).collect(),
                        sums: vec![None; aggregates.len()],
                    });
                    g
                }
            }
        };
        for (a, expr) in aggregates.iter().enumerate() {
            let Expr::Sum(inner) = expr else { unreachable!("only SUM is collected") };
            if let Some(v) = ctx.int_row(inner, r)? {
                let acc = &mut groups[g].sums[a];
                *acc = Some(match acc {
                    None => v,
                    Some(s) => s.checked_add(v).ok_or_else(|| TableError::Overflow(expr.to_string()))?,
                });
            }
        }
    }

    let eval = |expr: &Expr, group: &Group| eval_group(expr, group, &ast.group_by, &aggregates);
    let mut out: Vec<(Vec<Value>, Vec<Value>, Vec<Value>)> = Vec::with_capacity(groups.len());
    for group in &groups {
        let row = items.iter().map(|i| eval(&i.expr, group)).collect::<Result<Vec<_>, _>>()?;
        let sort_key = order_sources
            .iter()
            .map(|s| match s {
                OrderSource::Output(i) => Ok(row[*i].clone()),
                OrderSource::Expr(e) => eval(e, group),
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push((sort_key, group.key.clone(), row));
    }
    out.sort_by(|a, b| compare_keys(&a.0, &b.0, &ast.order_by).then_with(|| a.1.cmp(&b.1)));
    let mut rs = ResultSet { columns: names, rows: out.into_iter().map(|(_, _, row)| row).collect() };
    truncate(&mut rs, ast.limit);
    Ok(rs)
}

enum OrderSource<'a> {
    Output(usize),
    Expr(&'a Expr),
}

impl<'a> OrderSource<'a> {
    fn expr(&self) -> Option<&'a Expr> {
        match self {
            OrderSource::Expr(e) => Some(e),
            OrderSource::Output(_) => None,
        }
    }
}

struct Group {
    key: Vec<Value>,
    sums: Vec<Option<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum KeyPart {
    Null,
    Int(i64),
    Code(u32),
}

fn key_part(seg: &Segment, row: usize) -> KeyPart {
    match seg {
        Segment::Int { values, valid } => {
            if valid[row] {
                KeyPart::Int(values[row])
            } else {
                KeyPart::Null
            }
        }
        Segment::Text { codes, .. } => match codes[row] {
            u32::MAX => KeyPart::Null,
            c => KeyPart::Code(c),
        },
    }
}

fn collect_sums<'a>(expr: &'a Expr, out: &mut Vec<&'a Expr>) {
    match expr {
        Expr::Sum(_) => {
            if !out.contains(&expr) {
                out.push(expr);
            }
        }
        Expr::Add(a, b) => {
            collect_sums(a, out);
            collect_sums(b, out);
        }
        Expr::Column(_) | Expr::Int(_) => {}
    }
}

fn eval_group(expr: &Expr, group: &Group, group_by: &[String], aggregates: &[&Expr]) -> Result<Value, TableError> {
    match expr {
        Expr::Column(c) => group_by
            .iter()
            .position(|g| g.eq_ignore_ascii_case(c))
            .map(|i| group.key[i].clone())
            .ok_or_else(|| TableError::InvalidQuery(format!("{c} is not a GROUP BY column"))),
        Expr::Int(v) => Ok(Value::Int(*v)),
        Expr::Sum(_) => {
            let i = aggregates.iter().position(|a| *a == expr).expect("aggregate collected before evaluation");
            Ok(group.sums[i].map_or(Value::Null, Value::Int))
        }
        Expr::Add(a, b) => add(
            eval_group(a, group, group_by, aggregates)?,
            eval_group(b, group, group_by, aggregates)?,
            expr,
        ),
    }
}

/// Stable ORDER BY for non-aggregate queries; without ORDER BY rows keep
/// scan order.
fn order_plain(ctx: &Ctx<'_>, rs: &mut ResultSet, rows: &[usize], order: &[OrderItem]) -> Result<(), TableError> {
    if order.is_empty() {
        return Ok(());
    }
    let mut keyed = Vec::with_capacity(rs.rows.len());
    for (n, out_row) in std::mem::take(&mut rs.rows).into_iter().enumerate() {
        let mut key = Vec::with_capacity(order.len());
        for o in order {
            let by_name = match &o.expr {
                Expr::Column(c) => rs.column_index(c),
                _ => None,
            };
            key.push(match by_name {
                Some(i) => out_row[i].clone(),
                None => ctx.eval_row(&o.expr, rows[n])?,
            });
        }
        keyed.push((key, out_row));
    }
    keyed.sort_by(|a, b| compare_keys(&a.0, &b.0, order));
    rs.rows = keyed.into_iter().map(|(_, r)| r).collect();
    Ok(())
}

fn truncate(rs: &mut ResultSet, limit: Option<u64>) {
    if let Some(n) = limit {
        rs.rows.truncate(n as usize);
    }
}

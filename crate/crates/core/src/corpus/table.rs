/// A table lifted out of a procedure. `header` holds the column headers and
/// may be empty; the first cell of each body row acts as the row header.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Table {
    pub caption: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Flatten a table into indexable text.
///
/// With column headers every body cell becomes a line
/// `"<row header> — <column header>: <cell>"`. Without headers the cells are
/// emitted row-major, joined by `"; "`. Ragged rows use the shorter of the
/// header and cell lists.
pub fn flatten_table(table: &Table) -> String {
    if table.header.is_empty() {
        return table
            .rows
            .iter()
            .flatten()
            .filter(|c| !c.is_empty())
            .map(String::as_str)
            .collect::<Vec<_>>()
            .join("; ");
    }

    let mut lines = Vec::new();
    for row in &table.rows {
        let Some(row_header) = row.first() else { continue };
        if row.len() == 1 {
            if !row_header.is_empty() {
                lines.push(row_header.clone());
            }
            continue;
        }
        let width = row.len().min(table.header.len());
        for (cell, column) in row[1..width].iter().zip(&table.header[1..width]) {
            if !cell.is_empty() {
                lines.push(format!("{row_header} — {column}: {cell}"));
            }
        }
    }
    lines.join("\n")
}

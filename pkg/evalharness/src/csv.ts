/** Minimal CSV writer, quotes only when a field needs it. */

export type CsvValue = string | number | boolean;

function escapeField(value: CsvValue): string {
  const text = String(value);
  if (/[",\n]/.test(text)) {
    return `"${text.replace(/"/g, '""')}"`;
  }
  return text;
}

export function toCsv(header: string[], rows: CsvValue[][]): string {
  const lines = [header.map(escapeField).join(",")];
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(
        `row has ${row.length} fields, header has ${header.length}`,
      );
    }
    lines.push(row.map(escapeField).join(","));
  }
  return lines.join("\n") + "\n";
}

"""
NucleiGrind — Terminal UI powered by Rich.
Handles all display: reports, self-check tables, glossary and errors.
Library code never prints; everything the user sees goes through here.
"""
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

console = Console()
err_console = Console(stderr=True)

# ── Brand color used for headers everywhere ──
LOGO_COLOR = "bold orange1"


# ═══════════════════════════════════════════════════════════
#  UTILITIES
# ═══════════════════════════════════════════════════════════

def separator():
    """Print a dim separator line for visual breathing room between sections."""
    console.print(f"\n  [dim]{'─' * 60}[/dim]\n")


def _fmt(value, digits=6):
    if value is None:
        return "[dim]—[/dim]"
    return f"{value:.{digits}f}"


def show_error(message):
    err_console.print(f"[bold bright_red]❌ Error:[/bold bright_red] [bright_yellow]{escape(str(message))}[/bright_yellow]")


def show_written(path, what="Output"):
    console.print(f"  [bold bright_green]✅ {what} written to:[/bold bright_green] [bright_cyan]{escape(str(path))}[/bright_cyan]")


def show_synth(spec, labels, path):
    """Summary line for a generated fixture."""
    count = int(labels.max()) if labels.size else 0
    console.print(
        f"  [bright_white]{spec.height}x{spec.width}[/bright_white] · "
        f"[bright_cyan]{count}[/bright_cyan] {spec.shape.value}(s) · seed [bright_yellow]{spec.seed}[/bright_yellow]"
    )
    show_written(path, "Label map")


# ═══════════════════════════════════════════════════════════
#  METRICS
# ═══════════════════════════════════════════════════════════

def show_metrics(report):
    table = Table(title=f"[{LOGO_COLOR}]📏 Evaluation[/{LOGO_COLOR}]", border_style="bright_cyan")
    table.add_column("Metric", style="bold bright_white")
    table.add_column("Value", justify="right", style="bright_yellow")
    table.add_row("Dice", _fmt(report.dice))
    table.add_row("AJI", _fmt(report.aji))
    table.add_row("Hausdorff (px)", _fmt(report.hausdorff, 3))
    table.add_row("PQ", _fmt(report.pq))
    table.add_row("  DQ", _fmt(report.dq))
    table.add_row("  SQ", _fmt(report.sq))
    table.add_row("Matches (IoU > 0.5)", str(len(report.matches)))
    console.print(table)


# ═══════════════════════════════════════════════════════════
#  INVARIANCE LAB
# ═══════════════════════════════════════════════════════════

def show_invariance(rows, relation=None):
    table = Table(title=f"[{LOGO_COLOR}]🔄 Direction Invariance[/{LOGO_COLOR}]", border_style="bright_cyan")
    table.add_column("Encoder", style="bold bright_white")
    table.add_column("Transform", style="bright_cyan")
    table.add_column("Max |error|", justify="right")
    table.add_column("Mean |error|", justify="right")
    table.add_column("Dice bias", justify="right")
    for row in rows:
        style = "bright_green" if row.max_abs_error == 0 else "bright_red"
        table.add_row(
            row.encoder.value,
            row.to_json()["transform"],
            f"[{style}]{_fmt(row.max_abs_error)}[/{style}]",
            _fmt(row.mean_abs_error),
            _fmt(row.pipeline_dice_bias),
        )
    console.print(table)

    if relation is not None:
        separator()
        console.print(Panel(
            f"  [bright_white]corr(-∂SE/∂col, HV h)[/bright_white]  [bright_yellow]{relation.corr_h:.4f}[/bright_yellow]\n"
            f"  [bright_white]corr(-∂SE/∂row, HV v)[/bright_white]  [bright_yellow]{relation.corr_v:.4f}[/bright_yellow]\n"
            f"  [bright_white]Dir agreement[/bright_white]          [bright_yellow]{relation.dir_agreement:.2%}[/bright_yellow]"
            f"  [dim]({relation.interior_pixels} interior px)[/dim]",
            title="[bold bright_magenta]🧭 Encoding Relations[/bold bright_magenta]",
            border_style="bright_magenta",
            width=70,
        ))


# ═══════════════════════════════════════════════════════════
#  SELF-CHECK
# ═══════════════════════════════════════════════════════════

def show_selfcheck(results):
    table = Table(title=f"[{LOGO_COLOR}]🧪 Self-check[/{LOGO_COLOR}]", border_style="bright_cyan")
    table.add_column("#", justify="right", style="dim")
    table.add_column("Suite", style="bold bright_white")
    table.add_column("Result", justify="center")
    table.add_column("Time", justify="right", style="dim")
    table.add_column("Detail", style="bright_white")
    for index, result in enumerate(results, 1):
        verdict = "[bold bright_green]PASS[/bold bright_green]" if result.passed else "[bold bright_red]FAIL[/bold bright_red]"
        table.add_row(str(index), result.name, verdict, f"{result.seconds:.2f}s", result.detail)
    console.print(table)

    failed = [r for r in results if not r.passed]
    if failed:
        console.print(f"\n  [bold bright_red]❌ {len(failed)} suite(s) failed.[/bold bright_red]")
    else:
        console.print("\n  [bold bright_green]✨ All suites passed ✨[/bold bright_green]")


# ═══════════════════════════════════════════════════════════
#  GLOSSARY
# ═══════════════════════════════════════════════════════════

def show_glossary():
    """Display the terminology glossary, one panel per category."""
    from content.glossary import NUCLEI_GLOSSARY

    console.print(f"\n  [{LOGO_COLOR}]📖 NUCLEIGRIND GLOSSARY[/{LOGO_COLOR}]")
    console.print(f"  [dim]{len(NUCLEI_GLOSSARY)} categories[/dim]\n")

    for cat_idx, (category_name, terms) in enumerate(NUCLEI_GLOSSARY, 1):
        content_lines = []
        for term, explanation in terms:
            content_lines.append(f"  [bold bright_yellow]{term}[/bold bright_yellow]")
            content_lines.append(f"    [bright_white]{explanation}[/bright_white]")
            content_lines.append("")

        body = "\n".join(content_lines).rstrip()

        console.print(Panel(
            body,
            title=f"[bold bright_cyan]{category_name}  [dim]({cat_idx}/{len(NUCLEI_GLOSSARY)})[/dim][/bold bright_cyan]",
            border_style="bright_cyan",
            width=75,
            padding=(1, 2),
        ))

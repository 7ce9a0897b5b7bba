"""
Report Generator Module
PDF summary of a discovery run
"""

from datetime import datetime
from pathlib import Path
from typing import Optional

from reportlab.lib import colors
from reportlab.lib.enums import TA_CENTER
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import getSampleStyleSheet, ParagraphStyle
from reportlab.lib.units import inch
from reportlab.platypus import SimpleDocTemplate, Paragraph, Spacer, Image, PageBreak, Table, TableStyle


class ReportGenerator:
    """
    PDF run report: data summary, division summary, pseudo-domain summary, figures
    """

    def __init__(self, output_dir: str = "output"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(exist_ok=True, parents=True)
        self.styles = getSampleStyleSheet()
        self._setup_custom_styles()

    def _setup_custom_styles(self):
        self.styles.add(ParagraphStyle(
            name='CustomTitle',
            parent=self.styles['Heading1'],
            fontSize=22,
            textColor=colors.HexColor('#1f77b4'),
            spaceAfter=24,
            alignment=TA_CENTER,
            fontName='Helvetica-Bold'
        ))
        self.styles.add(ParagraphStyle(
            name='SectionHeading',
            parent=self.styles['Heading2'],
            fontSize=16,
            textColor=colors.HexColor('#2ca02c'),
            spaceAfter=12,
            spaceBefore=12,
            fontName='Helvetica-Bold'
        ))
        self.styles.add(ParagraphStyle(
            name='SubsectionHeading',
            parent=self.styles['Heading3'],
            fontSize=13,
            textColor=colors.HexColor('#ff7f0e'),
            spaceAfter=8,
            fontName='Helvetica-Bold'
        ))

    def generate_report(self, input_path: str, insights: dict, visualizations_dir: Optional[str] = None,
                        timestamp: bool = True) -> str:
        """
        Build the PDF

        Args:
            input_path: descriptor file the run read
            insights: dict with 'data_info', 'division_report', 'assignment' and
                optionally 'evaluation' and 'config'
            visualizations_dir: directory whose PNGs are appended
            timestamp: stamp the generation time into the file name and header

        Returns:
            Path of the PDF
        """
        stamp = datetime.now()
        name = f"discovery_report_{stamp.strftime('%Y%m%d_%H%M%S')}.pdf" if timestamp else "discovery_report.pdf"
        report_path = self.output_dir / name
        doc = SimpleDocTemplate(str(report_path), pagesize=letter, rightMargin=72, leftMargin=72,
                                topMargin=72, bottomMargin=18)

        elements = [Paragraph("Latent Domain Discovery Report", self.styles['CustomTitle']), Spacer(1, 12)]
        meta = f"<b>Input:</b> {Path(input_path).name}<br/>"
        if timestamp:
            meta = f"<b>Generated:</b> {stamp.strftime('%Y-%m-%d %H:%M:%S')}<br/>" + meta
        elements.append(Paragraph(meta, self.styles['Normal']))
        elements.append(Spacer(1, 20))

        elements.append(Paragraph("Descriptors", self.styles['SectionHeading']))
        elements.append(self._key_value_table(self._data_rows(insights.get('data_info', {}))))
        elements.append(Spacer(1, 20))

        elements.append(Paragraph("Granular-Ball Division", self.styles['SectionHeading']))
        elements.append(self._key_value_table(self._division_rows(insights.get('division_report', {}))))
        elements.append(Spacer(1, 20))

        elements.append(Paragraph("Pseudo-Domains", self.styles['SectionHeading']))
        elements.append(self._key_value_table(self._domain_rows(insights.get('assignment', {}),
                                                                insights.get('evaluation'))))

        if insights.get('config'):
            elements.append(PageBreak())
            elements.append(Paragraph("Run Configuration", self.styles['SectionHeading']))
            rows = [[str(k), str(v)] for k, v in sorted(insights['config'].items()) if v is not None]
            elements.append(self._key_value_table(rows))

        if visualizations_dir:
            elements.append(PageBreak())
            elements.append(Paragraph("Figures", self.styles['SectionHeading']))
            elements.extend(self._add_visualizations(visualizations_dir))

        doc.build(elements)
        return str(report_path)

    def _key_value_table(self, rows: list) -> Table:
        table = Table([['Metric', 'Value']] + rows, colWidths=[3 * inch, 3 * inch])
        table.setStyle(TableStyle([
            ('BACKGROUND', (0, 0), (-1, 0), colors.HexColor('#2a5298')),
            ('TEXTCOLOR', (0, 0), (-1, 0), colors.whitesmoke),
            ('ALIGN', (0, 0), (-1, -1), 'LEFT'),
            ('FONTNAME', (0, 0), (-1, 0), 'Helvetica-Bold'),
            ('FONTSIZE', (0, 0), (-1, 0), 12),
            ('BOTTOMPADDING', (0, 0), (-1, 0), 10),
            ('GRID', (0, 0), (-1, -1), 1, colors.black),
            ('FONTNAME', (0, 1), (-1, -1), 'Helvetica'),
            ('FONTSIZE', (0, 1), (-1, -1), 10),
            ('ROWBACKGROUNDS', (0, 1), (-1, -1), [colors.white, colors.lightgrey])
        ]))
        return table

    def _data_rows(self, data_info: dict) -> list:
        rows = [['Samples (N)', f"{data_info.get('N', 0):,}"],
                ['Descriptor dimension (D)', str(data_info.get('D', '-'))],
                ['Has GT counts', str(data_info.get('has_count', False))],
                ['Has true domains', str(data_info.get('has_domain', False))]]
        quantiles = data_info.get('count_quantiles')
        if quantiles:
            rows.append(['Median GT count', f"{quantiles[0.5]:.1f}"])
        return rows

    def _division_rows(self, report: dict) -> list:
        rows = [['Leaf balls', str(report.get('num_balls', '-'))],
                ['Accepted splits', str(report.get('accepted_splits', '-'))],
                ['Rejected splits', str(report.get('rejected_splits', '-'))],
                ['Max depth', str(report.get('max_depth', '-'))]]
        if 'size_median' in report:
            rows.append(['Ball size min / median / max',
                         f"{report['size_min']} / {report['size_median']:.1f} / {report['size_max']}"])
        for reason, count in sorted(report.get('leaf_reasons', {}).items(), key=lambda kv: str(kv[0])):
            rows.append([f"Leaves stopped by {reason}", str(count)])
        return rows

    def _domain_rows(self, assignment: dict, evaluation: Optional[dict]) -> list:
        rows = [['K', str(assignment.get('K', '-'))],
                ['Source', str(assignment.get('source', '-'))],
                ['Epoch', str(assignment.get('epoch', '-'))]]
        if evaluation:
            rows.append(['Group sizes', ', '.join(str(s) for s in evaluation['group_sizes'])])
            strat = evaluation.get('stratification')
            if strat:
                rows.append(['Delta med', f"{strat['delta_med']:.2f}"])
                rows.append(['Sigma med', f"{strat['sigma_med']:.2f}"])
            if evaluation.get('ari') is not None:
                rows.append(['ARI vs true domains', f"{evaluation['ari']:.4f}"])
        return rows

    def _add_visualizations(self, visualizations_dir: str) -> list:
        elements = []
        viz_dir = Path(visualizations_dir)
        if not viz_dir.exists():
            return elements
        for img_path in sorted(viz_dir.glob("*.png")):
            title = ' '.join(img_path.stem.split('_')[1:]).title()
            elements.append(Paragraph(f"<b>{title}</b>", self.styles['SubsectionHeading']))
            elements.append(Image(str(img_path), width=6.0 * inch, height=4.0 * inch, kind='proportional'))
            elements.append(Spacer(1, 15))
        return elements

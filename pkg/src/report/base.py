import csv
import logging
import os.path as op

from pyrocko import guts
from pyrocko.guts import Object, Bool, Float, Int, List, String

from shearstrip.meta import ShearStripError
from shearstrip.info import VersionInfo

guts_prefix = 'shearstrip'
logger = logging.getLogger('shearstrip.report')

float_format = '%.10e'


class Claim(Object):
    criterion = Int.T()
    claim_id = String.T()
    description = String.T()
    expected = String.T()
    computed_value = Float.T(optional=True)
    tolerance = Float.T(optional=True)
    passed = Bool.T(default=False)
    skipped = Bool.T(default=False)
    details = String.T(default='')

    @property
    def status(self):
        if self.skipped:
            return 'SKIPPED'

        return 'PASS' if self.passed else 'FAIL'

    def summary_line(self):
        if self.computed_value is None:
            computed = 'n/a'
        else:
            computed = '%.6f' % self.computed_value

        s = '[%i] %s %s, computed %s, %s' % (
            self.criterion, self.description, self.expected, computed,
            self.status)

        if self.tolerance is not None:
            s += ' (tolerance %g)' % self.tolerance

        return s


class Report(Object):
    experiment = String.T()
    claims = List.T(Claim.T())
    version_info = VersionInfo.T(optional=True)

    def add(self, claim):
        if any(c.claim_id == claim.claim_id for c in self.claims):
            raise ShearStripError('duplicate claim: %s' % claim.claim_id)

        self.claims.append(claim)
        if claim.passed or claim.skipped:
            logger.info('%s', claim.summary_line())
        else:
            logger.warning('%s', claim.summary_line())

    @property
    def all_passed(self):
        return all(claim.passed or claim.skipped for claim in self.claims)

    def get_claim(self, claim_id):
        for claim in self.claims:
            if claim.claim_id == claim_id:
                return claim

        raise KeyError(claim_id)

    def summary(self):
        lines = ['shearstrip report, experiment: %s' % self.experiment, '']
        for claim in self.claims:
            lines.append(claim.summary_line())
            if claim.details:
                for detail in claim.details.splitlines():
                    lines.append('      %s' % detail)

        npassed = sum(1 for claim in self.claims if claim.passed)
        nskipped = sum(1 for claim in self.claims if claim.skipped)
        lines.append('')
        s = '%i of %i claims passed' % (
            npassed, len(self.claims) - nskipped)
        if nskipped:
            s += ', %i skipped' % nskipped

        lines.append(s)
        if self.version_info:
            lines.append('')
            lines.append('shearstrip %s' % self.version_info.shearstrip_version)
            for name, version in sorted(
                    self.version_info.dependencies.items()):
                lines.append('%s %s' % (name, version))

        return '\n'.join(lines) + '\n'


def format_value(value):
    if isinstance(value, float):
        return float_format % value

    return str(value)


def write_csv(path, header, rows):
    '''
    Write rows of numbers and labels, floats in a fixed format.
    '''
    try:
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(value) for value in row])

    except OSError as e:
        raise ShearStripError('cannot write file %s: %s' % (path, e))

    logger.debug('Wrote %s', path)


def write_report(report, out_path):
    try:
        with open(op.join(out_path, 'summary.txt'), 'w') as f:
            f.write(report.summary())

        guts.dump(
            report,
            filename=op.join(out_path, 'report.yaml'),
            header='shearstrip report')

    except OSError as e:
        raise ShearStripError(
            'cannot write report to %s: %s' % (out_path, e))


__all__ = '''
    Claim
    Report
    write_csv
    write_report
'''.split()

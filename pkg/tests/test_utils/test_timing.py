from ndf.utils.timing import Timer, echo_results, format_value, timed


def test_timer_reports_milliseconds():
    with Timer() as timer:
        pass
    assert timer.ms >= 0
    with timed('noop') as block:
        pass
    assert isinstance(block.ms, int)


def test_result_lines(capsys):
    echo_results({'vertices': 12, 'loss_p': 1.234567891e-05, 'status': 'ok'})
    assert capsys.readouterr().out.splitlines() == ['vertices=12', 'loss_p=1.23457e-05', 'status=ok']
    assert format_value(0.5) == '0.5'

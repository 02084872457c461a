"""Event bus delivery semantics and the background task executor."""

from __future__ import annotations

import threading
import time

import pytest

from imhotep.errors import ExecutorShutDown
from imhotep.runtime import EventBus, Runtime, TaskExecutor, TaskStatus


def test_subscribe_publish_pump_once():
    bus = EventBus()
    seen = []
    bus.subscribe("patient.loaded", seen.append)
    bus.publish("patient.loaded", {"n": 1})
    assert seen == []                 # nothing before the pump
    assert bus.pump_events() == 1
    assert seen == [{"n": 1}]
    assert bus.pump_events() == 0     # exactly once


def test_subscribers_fire_in_subscription_order():
    bus = EventBus()
    order = []
    bus.subscribe("t", lambda _: order.append("first"))
    bus.subscribe("t", lambda _: order.append("second"))
    bus.publish("t")
    bus.pump_events()
    assert order == ["first", "second"]


def test_unsubscribe_stops_delivery():
    bus = EventBus()
    seen = []
    sub = bus.subscribe("t", seen.append)
    bus.unsubscribe(sub)
    bus.publish("t", 1)
    bus.pump_events()
    assert seen == []


def test_publish_without_subscribers_is_noop():
    bus = EventBus()
    bus.publish("nobody.listens", 42)
    assert bus.pump_events() == 1     # drained, no effect, no error


def test_fifo_per_topic():
    bus = EventBus()
    seen = []
    bus.subscribe("t", seen.append)
    bus.publish("t", "A")
    bus.publish("t", "B")
    bus.pump_events()
    assert seen == ["A", "B"]


def test_bounded_pump_leaves_remainder():
    bus = EventBus()
    seen = []
    bus.subscribe("t", seen.append)
    for k in range(3):
        bus.publish("t", k)
    assert bus.pump_events(2) == 2
    assert seen == [0, 1]
    assert bus.pending() == 1


def test_events_published_during_delivery_wait():
    bus = EventBus()
    seen = []

    def handler(payload):
        seen.append(payload)
        if payload == "outer":
            bus.publish("t", "inner")

    bus.subscribe("t", handler)
    bus.publish("t", "outer")
    assert bus.pump_events() == 1
    assert seen == ["outer"]
    assert bus.pump_events() == 1
    assert seen == ["outer", "inner"]


def test_pump_reentry_rejected():
    bus = EventBus()

    def handler(_):
        bus.pump_events()

    bus.subscribe("t", handler)
    bus.publish("t")
    with pytest.raises(RuntimeError):
        bus.pump_events()


def test_cross_thread_publish_delivered_on_pumping_thread():
    bus = EventBus()
    delivery_threads = []
    bus.subscribe("t", lambda _: delivery_threads.append(threading.get_ident()))
    worker = threading.Thread(target=lambda: bus.publish("t", 1))
    worker.start()
    worker.join()
    bus.pump_events()
    assert delivery_threads == [threading.get_ident()]


def test_task_completion_event_carries_value():
    bus = EventBus()
    executor = TaskExecutor(bus)
    done = []
    bus.subscribe("job.done", done.append)
    handle = executor.submit_task(lambda: 42, "job.done")
    deadline = time.time() + 5
    while handle.status not in (TaskStatus.DONE, TaskStatus.FAILED):
        assert time.time() < deadline
        time.sleep(0.005)
    bus.pump_events()
    assert len(done) == 1
    assert done[0].ok and done[0].value == 42 and done[0].task_id == handle.id
    assert handle.progress == 1.0
    executor.shutdown()


def test_task_failure_event():
    bus = EventBus()
    executor = TaskExecutor(bus)
    done = []
    bus.subscribe("job.done", done.append)

    def boom():
        raise ValueError("broken data")

    handle = executor.submit_task(boom, "job.done")
    deadline = time.time() + 5
    while handle.status is not TaskStatus.FAILED:
        assert time.time() < deadline
        time.sleep(0.005)
    bus.pump_events()
    assert len(done) == 1
    assert not done[0].ok
    assert isinstance(done[0].error, ValueError)


def test_progress_reports_are_monotone():
    bus = EventBus()
    executor = TaskExecutor(bus)

    def job(progress):
        progress(0.5)
        progress(0.2)       # must not move backwards
        progress(0.8)
        return "ok"

    handle = executor.submit_task(job, "job.done")
    deadline = time.time() + 5
    while handle.status is not TaskStatus.DONE:
        assert time.time() < deadline
        time.sleep(0.005)
    assert handle.progress == 1.0
    executor.shutdown()


def test_submit_after_shutdown_raises():
    bus = EventBus()
    executor = TaskExecutor(bus)
    executor.shutdown()
    with pytest.raises(ExecutorShutDown):
        executor.submit_task(lambda: 1, "t")


def test_thousand_concurrent_tasks_exactly_one_completion_each():
    bus = EventBus()
    executor = TaskExecutor(bus, max_workers=8)
    counts: dict[int, int] = {}
    bus.subscribe("done", lambda c: counts.__setitem__(c.task_id, counts.get(c.task_id, 0) + 1))

    handles = []
    submit_lock = threading.Lock()

    def submitter(base):
        for k in range(125):
            h = executor.submit_task(lambda k=k: k, "done")
            with submit_lock:
                handles.append(h)

    threads = [threading.Thread(target=submitter, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    deadline = time.time() + 30
    delivered = 0
    while delivered < 1000:
        assert time.time() < deadline, f"only {delivered} completions arrived"
        delivered += bus.pump_events(64)    # bounded slices keep the pump responsive
        time.sleep(0.001)
    assert len(handles) == 1000
    assert sorted(counts.keys()) == sorted(h.id for h in handles)
    assert all(v == 1 for v in counts.values())
    executor.shutdown()


def test_patient_load_as_background_task(patient_dir):
    rt = Runtime()
    results = []
    rt.bus.subscribe("patient.loaded", results.append)
    rt.executor.submit_task(
        lambda: __import__("imhotep.patient", fromlist=["load_patient_directory"])
        .load_patient_directory(patient_dir),
        "patient.loaded")
    deadline = time.time() + 30
    while not results:
        pumped = rt.bus.pump_events(5)    # one bounded slice never blocks
        assert pumped <= 5
        assert time.time() < deadline
        time.sleep(0.002)
    assert results[0].ok
    assert len(results[0].value.meshes) == 3
    rt.close()

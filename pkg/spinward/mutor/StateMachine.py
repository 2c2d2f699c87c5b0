#   StateMachine.py

"""
State machine mixin.

Dispatches to event handler methods whose names
follow the naming convention:
    state_(currentState)_(event)
"""
import logging

logger = logging.getLogger(__name__)


class StateError(Exception):
    pass


class StateMachine(object):
    """
    State machine mixin class.

    The central method is state_machine_event. Call it with an event;
    together with the current state it selects the handler
    state_<state>_<event>. A missing handler means the event is not
    allowed in the current state and raises StateError.

    SUBCLASS RESPONSIBILITIES:

        _get_current_state(self)
            Return the current state value.

        _get_state_string(self, state) / _get_event_string(self, event)
            Translate state/event values to the strings used in handler
            names. With EnumType values these return Enum[value].

    Each handler performs the transition (and any work attached to it)
    and may return a value, which state_machine_event passes back.
    """

    def __init__(self, *args, **kwargs):
        self._event_handlers = {}
        self.transitions = []


    def _get_current_state(self):
        """
        Return the current state, in whatever form it is normally used for the class.
        """
        raise NotImplementedError()


    def _handler_name(self, state, event):
        return 'state_%s_%s' % (self._get_state_string(state), self._get_event_string(event))


    def _get_event_handler(self, event):
        """
        Locate (and cache) the handler for the current state and event.

        @return bound handler, or None if the event is not allowed
        """
        from_state = self._get_current_state()
        handler_key = (from_state, event)
        handler = self._event_handlers.get(handler_key)
        if handler is None:
            handler = getattr(self, self._handler_name(from_state, event), None)
            if handler is not None:
                self._event_handlers[handler_key] = handler
        return handler


    def state_machine_event(self, event, *args, **kwargs):
        """
        Invoke the handler for the current state and the event.

        @return whatever the handler returns
        @raise StateError if the event is not allowed in the current state
        """
        from_state = self._get_current_state()
        handler = self._get_event_handler(event)
        if handler is None:
            raise StateError('No state event handler %s' % self._handler_name(from_state, event))
        result = handler(*args, **kwargs)
        to_state = self._get_current_state()
        self.transitions.append((from_state, event, to_state))
        if to_state != from_state:
            logger.debug("%s: %s --%s--> %s", self.__class__.__name__,
                         self._get_state_string(from_state), self._get_event_string(event),
                         self._get_state_string(to_state))
        return result


    def _get_state_string(self, state):
        """
        Default implementation: Simply coerce state to string.
        """
        return str(state)


    def _get_event_string(self, event):
        """
        Default implementation: Simply coerce event to string.
        """
        return str(event)

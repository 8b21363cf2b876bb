""":mod:`areosync.metadata` --- Project metadata

This project simulates a distributed, passivity-based acquisition and
station-keeping law for an equally-spaced areostationary constellation.

"""
title = 'areosync'
nice_title = 'Areostationary constellation coordination'
nice_title_no_spaces = nice_title.replace(' ', '')
version = '0.1'
description = ('Distributed acquisition and station-keeping simulator for '
               'areostationary satellite constellations')
authors = ['The areosync developers']
authors_string = ', '.join(authors)
emails = ['areosync@users.noreply.github.com']
license = 'MIT'
copyright = '2026 ' + authors_string
url = ''
